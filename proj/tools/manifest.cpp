#include "manifest.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "a5cycle/record_io.hpp"

namespace a5cycle::cli {

namespace fs = std::filesystem;

std::string sha256_file(const fs::path& path) {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "rb"), &std::fclose);
    if (!f) throw IoError("cannot open " + path.string());
    std::unique_ptr<EVP_MD_CTX, void (*)(EVP_MD_CTX*)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw IoError("sha256 init failed");

    std::vector<unsigned char> buf(1 << 20);
    for (;;) {
        const std::size_t got = std::fread(buf.data(), 1, buf.size(), f.get());
        if (got) EVP_DigestUpdate(ctx.get(), buf.data(), got);
        if (got < buf.size()) break;
    }
    if (std::ferror(f.get())) throw IoError("read error on " + path.string());

    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned len = 0;
    EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

RunManifest::RunManifest(fs::path dir) : dir_(std::move(dir)) {
    const fs::path p = dir_ / kFileName;
    if (fs::exists(p)) {
        std::ifstream in(p);
        try {
            doc_ = json::parse(in);
        } catch (const json::exception& e) {
            throw IoError("corrupt manifest " + p.string() + ": " + e.what());
        }
        if (doc_.value("version", 0) != 1) throw IoError("unsupported manifest version in " + p.string());
    } else {
        doc_ = {{"version", 1}, {"settings", json::object()}, {"stages", json::object()}};
    }
}

const json* RunManifest::stage(const std::string& name) const {
    const auto& st = doc_["stages"];
    auto it = st.find(name);
    return it == st.end() ? nullptr : &*it;
}

bool RunManifest::up_to_date(const std::string& name, const json& config) const {
    const json* s = stage(name);
    if (!s || s->at("config") != config) return false;
    for (const char* key : {"inputs", "outputs"}) {
        for (const auto& [file, digest] : s->at(key).items()) {
            if (!fs::exists(dir_ / file)) return false;
            if (sha256_file(dir_ / file) != digest.get<std::string>()) return false;
        }
    }
    return true;
}

std::string RunManifest::consume(const std::string& producer, const json& producer_config,
                                 const std::string& file) const {
    const json* s = stage(producer);
    if (!s) throw ConfigError(file + " missing: run the '" + producer + "' stage first");
    if (s->at("config") != producer_config)
        throw ConfigError(file + " is stale: rerun the '" + producer + "' stage with the current settings");
    const auto& outs = s->at("outputs");
    if (!outs.contains(file)) throw ConfigError("stage '" + producer + "' did not produce " + file);
    const fs::path p = dir_ / file;
    if (!fs::exists(p)) throw IoError(p.string() + " missing");
    const std::string digest = sha256_file(p);
    if (digest != outs.at(file).get<std::string>())
        throw IoError(p.string() + " does not match the digest recorded by '" + producer + "'");
    return digest;
}

void RunManifest::record(const std::string& name, const json& config,
                         const std::map<std::string, std::string>& inputs, const std::vector<std::string>& outputs,
                         const json& summary) {
    json outs = json::object();
    for (const auto& f : outputs) outs[f] = sha256_file(dir_ / f);
    doc_["stages"][name] = {{"config", config}, {"inputs", inputs}, {"outputs", outs}, {"summary", summary}};
}

void RunManifest::save() const {
    fs::create_directories(dir_);
    const fs::path tmp = dir_ / (std::string(kFileName) + ".tmp");
    {
        std::ofstream out(tmp);
        out << doc_.dump(2) << '\n';
        if (!out) throw IoError("cannot write " + tmp.string());
    }
    fs::rename(tmp, dir_ / kFileName);
}

}  // namespace a5cycle::cli
