#include "a5cycle/cipher.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace a5cycle {

CipherSpec CipherSpec::make(std::string name, std::array<unsigned, kRegisterCount> lengths,
                            std::array<std::vector<unsigned>, kRegisterCount> taps,
                            std::array<unsigned, kRegisterCount> clock_taps) {
    CipherSpec spec;
    spec.name_ = std::move(name);
    unsigned offset = 0;
    for (int k = 0; k < kRegisterCount; ++k) {
        const unsigned len = lengths[k];
        const std::string which = "register R" + std::to_string(k + 1);
        if (len < 2 || len > 31) throw ConfigError(which + ": length must be in [2, 31]");
        if (k > 0 && len < lengths[k - 1]) throw ConfigError("register lengths must be non-decreasing");
        auto& r = spec.regs_[k];
        r.length = len;
        r.taps = std::move(taps[k]);
        std::sort(r.taps.begin(), r.taps.end());
        r.taps.erase(std::unique(r.taps.begin(), r.taps.end()), r.taps.end());
        if (r.taps.empty()) throw ConfigError(which + ": no feedback taps");
        for (unsigned t : r.taps) {
            if (t >= len) throw ConfigError(which + ": tap " + std::to_string(t) + " out of range");
            r.tap_mask |= std::uint64_t{1} << t;
        }
        if (r.taps.back() != len - 1) throw ConfigError(which + ": top bit must be a feedback tap");
        if (clock_taps[k] + 1 >= len) throw ConfigError(which + ": clock tap and its neighbor must lie inside the register");
        r.clock_tap = clock_taps[k];
        r.offset = offset;
        r.value_mask = (std::uint64_t{1} << len) - 1;
        offset += len;
    }
    if (offset > 64) throw ConfigError("state does not fit in 64 bits");
    return spec;
}

CipherSpec CipherSpec::a51() {
    return make("a51", {19, 22, 23}, {{{13, 16, 17, 18}, {20, 21}, {7, 20, 21, 22}}}, {8, 10, 10});
}

CipherSpec CipherSpec::mini567() {
    return make("mini567", {5, 6, 7}, {{{2, 4}, {4, 5}, {3, 6}}}, {2, 3, 3});
}

CipherSpec CipherSpec::mini789() {
    return make("mini789", {7, 8, 9}, {{{5, 6}, {1, 2, 3, 7}, {4, 8}}}, {3, 4, 4});
}

CipherSpec CipherSpec::builtin(const std::string& name) {
    if (name == "a51") return a51();
    if (name == "mini567") return mini567();
    if (name == "mini789") return mini789();
    throw ConfigError("unknown builtin cipher '" + name + "'");
}

bool CipherSpec::operator==(const CipherSpec& other) const {
    for (int k = 0; k < kRegisterCount; ++k) {
        const auto& a = regs_[k];
        const auto& b = other.regs_[k];
        if (a.length != b.length || a.taps != b.taps || a.clock_tap != b.clock_tap) return false;
    }
    return name_ == other.name_;
}

bool is_valid(State x, const CipherSpec& spec) {
    if (spec.total_bits() < 64 && (x.bits >> spec.total_bits()) != 0) return false;
    for (int k = 0; k < kRegisterCount; ++k) {
        if (register_value(x, spec, k) == 0) return false;
    }
    return true;
}

std::uint64_t feedback_xor_fold(std::uint64_t value, const RegisterSpec& reg) {
    std::uint64_t fb = 0;
    for (unsigned t : reg.taps) fb ^= (value >> t) & 1u;
    return fb;
}

MultiplyFeedback::MultiplyFeedback(const RegisterSpec& reg) : tap_mask_(reg.tap_mask) {
    const unsigned k = static_cast<unsigned>(reg.taps.size());
    for (unsigned column = reg.taps.back(); column < 64; ++column) {
        std::uint64_t mult = 0;
        for (unsigned t : reg.taps) mult |= std::uint64_t{1} << (column - t);
        bool ok = true;
        for (std::uint64_t subset = 0; subset < (std::uint64_t{1} << k) && ok; ++subset) {
            std::uint64_t v = 0;
            for (unsigned i = 0; i < k; ++i) {
                if (subset >> i & 1u) v |= std::uint64_t{1} << reg.taps[i];
            }
            const std::uint64_t got = (v * mult >> column) & 1u;
            ok = got == (static_cast<std::uint64_t>(std::popcount(subset)) & 1u);
        }
        if (ok) {
            multiplier_ = mult;
            column_ = column;
            return;
        }
    }
}

bool PredecessorTable::contains(std::uint8_t entry, ClockSet pattern) {
    for (std::size_t i = 0; i < kPatterns.size(); ++i) {
        if (kPatterns[i] == pattern) return (entry >> i) & 1u;
    }
    return false;
}

PredecessorTable PredecessorTable::build() {
    PredecessorTable table;
    for (unsigned index = 0; index < 64; ++index) {
        const unsigned c[3] = {index >> 5 & 1u, index >> 3 & 1u, index >> 1 & 1u};
        const unsigned n[3] = {index >> 4 & 1u, index >> 2 & 1u, index & 1u};
        std::uint8_t entry = 0;
        for (std::size_t p = 0; p < kPatterns.size(); ++p) {
            const ClockSet pattern = kPatterns[p];
            // A clocked register's previous clock bit now sits one position higher.
            unsigned prev[3];
            for (int k = 0; k < 3; ++k) prev[k] = (pattern >> k & 1u) ? n[k] : c[k];
            if (majority_clock_set(prev[0], prev[1], prev[2]) == pattern) entry |= std::uint8_t(1u << p);
        }
        table.entries_[index] = entry;
    }
    return table;
}

unsigned PredecessorTable::index_of(State x, const CipherSpec& spec) const {
    unsigned bits[6];
    for (int k = 0; k < 3; ++k) {
        const unsigned pos = spec.clock_bit(k);
        bits[2 * k] = static_cast<unsigned>(x.bits >> pos) & 1u;
        bits[2 * k + 1] = static_cast<unsigned>(x.bits >> (pos + 1)) & 1u;
    }
    return index_of(bits[0], bits[1], bits[2], bits[3], bits[4], bits[5]);
}

unsigned PredecessorTable::empty_entries() const {
    return static_cast<unsigned>(std::count(entries_.begin(), entries_.end(), 0));
}

unsigned PredecessorTable::total_patterns() const {
    unsigned total = 0;
    for (auto e : entries_) total += static_cast<unsigned>(std::popcount(e));
    return total;
}

std::uint64_t unstep_register(std::uint64_t value, const RegisterSpec& reg) {
    const std::uint64_t low = value >> 1;
    const std::uint64_t top_mask = std::uint64_t{1} << (reg.length - 1);
    const std::uint64_t rest = static_cast<std::uint64_t>(std::popcount(low & reg.tap_mask & ~top_mask) & 1);
    const std::uint64_t top = (value & 1u) ^ rest;
    return low | (top << (reg.length - 1));
}

PredecessorList predecessors(State x, const CipherSpec& spec, const PredecessorTable& table) {
    PredecessorList out;
    const std::uint8_t entry = table.entry(table.index_of(x, spec));
    for (std::size_t p = 0; p < PredecessorTable::kPatterns.size(); ++p) {
        if (!((entry >> p) & 1u)) continue;
        const ClockSet pattern = PredecessorTable::kPatterns[p];
        std::uint64_t bits = x.bits;
        bool valid = true;
        for (int k = 0; k < kRegisterCount; ++k) {
            if (!(pattern & (1u << k))) continue;
            const auto& r = spec.reg(k);
            const std::uint64_t prev = unstep_register((bits >> r.offset) & r.value_mask, r);
            if (prev == 0) {
                valid = false;
                break;
            }
            bits = (bits & ~(r.value_mask << r.offset)) | (prev << r.offset);
        }
        if (valid) out.push(State{bits});
    }
    return out;
}

CandidateParams CandidateParams::make(const CipherSpec& spec, std::uint64_t fixed_r3) {
    if (fixed_r3 == 0) throw ConfigError("fixedR3 must be nonzero");
    if (fixed_r3 > spec.reg(2).value_mask) throw ConfigError("fixedR3 does not fit in register R3");
    return CandidateParams{fixed_r3};
}

CandidateParams CandidateParams::default_for(const CipherSpec& spec) {
    if (spec == CipherSpec::a51()) return make(spec, kA51FixedR3);
    return make(spec, std::uint64_t{1} << (spec.reg(2).clock_tap + 1));
}

bool is_candidate_reference(State x, const CandidateParams& params, const CipherSpec& spec,
                            const PredecessorTable& table) {
    if (register_value(x, spec, 2) != params.fixed_r3) return false;
    if (register_value(clock_forward(x, spec), spec, 2) == params.fixed_r3) return false;
    return !predecessors(x, spec, table).empty();
}

std::uint64_t expected_chain_count(const CipherSpec& spec, unsigned c3) {
    const unsigned l1 = spec.reg(0).length;
    const unsigned l2 = spec.reg(1).length;
    const std::uint64_t all = spec.register_period(0) * spec.register_period(1);
    const std::uint64_t unclocked = ((std::uint64_t{1} << (l1 - 1)) - c3) * ((std::uint64_t{1} << (l2 - 1)) - c3);
    return all - unclocked;
}

double expected_chain_length(const CipherSpec& spec, unsigned c3) {
    const double all = static_cast<double>(spec.register_period(0) * spec.register_period(1));
    return all / static_cast<double>(expected_chain_count(spec, c3));
}

Rational minimum_cycle_length(const CipherSpec& spec) {
    std::uint64_t num = 4 * spec.register_period(2);
    std::uint64_t den = 3;
    if (num % 3 == 0) {
        num /= 3;
        den = 1;
    }
    return Rational{num, den};
}

std::uint64_t enumerate_register_period(const RegisterSpec& reg) {
    std::uint64_t v = 1;
    std::uint64_t n = 0;
    do {
        v = step_register(v, reg);
        ++n;
    } while (v != 1 && n <= reg.value_mask);
    return n;
}

namespace {

std::vector<unsigned> parse_uints(const std::string& value, const std::string& key) {
    std::istringstream in(value);
    std::vector<unsigned> out;
    std::string tok;
    while (in >> tok) {
        std::size_t used = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != tok.size()) throw ConfigError("'" + key + "': not an unsigned integer: " + tok);
        out.push_back(static_cast<unsigned>(v));
    }
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string join(const std::vector<unsigned>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ' ';
        out += std::to_string(v[i]);
    }
    return out;
}

}  // namespace

CipherSpec parse_cipher_spec(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("cipher spec line " + std::to_string(lineno) + ": expected key = value");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    auto need = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw ConfigError("cipher spec: missing '" + key + "'");
        return it->second;
    };
    const auto lengths = parse_uints(need("lengths"), "lengths");
    const auto clocks = parse_uints(need("clock"), "clock");
    if (lengths.size() != 3) throw ConfigError("cipher spec: 'lengths' needs three values");
    if (clocks.size() != 3) throw ConfigError("cipher spec: 'clock' needs three values");
    std::array<std::vector<unsigned>, 3> taps;
    for (int k = 0; k < 3; ++k) {
        const std::string key = "taps" + std::to_string(k + 1);
        taps[k] = parse_uints(need(key), key);
    }
    const std::string name = kv.count("name") ? kv["name"] : std::string("custom");
    return CipherSpec::make(name, {lengths[0], lengths[1], lengths[2]}, std::move(taps), {clocks[0], clocks[1], clocks[2]});
}

std::string format_cipher_spec(const CipherSpec& spec) {
    std::ostringstream out;
    out << "name = " << spec.name() << '\n';
    out << "lengths = " << spec.reg(0).length << ' ' << spec.reg(1).length << ' ' << spec.reg(2).length << '\n';
    for (int k = 0; k < 3; ++k) out << "taps" << (k + 1) << " = " << join(spec.reg(k).taps) << '\n';
    out << "clock = " << spec.reg(0).clock_tap << ' ' << spec.reg(1).clock_tap << ' ' << spec.reg(2).clock_tap << '\n';
    return out.str();
}

CipherSpec load_cipher_spec(const std::string& name_or_path) {
    if (name_or_path == "a51" || name_or_path == "mini567" || name_or_path == "mini789") {
        return CipherSpec::builtin(name_or_path);
    }
    if (!std::filesystem::exists(name_or_path)) throw ConfigError("no builtin cipher or file named '" + name_or_path + "'");
    std::ifstream in(name_or_path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_cipher_spec(buf.str());
}

}  // namespace a5cycle
