#include "manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>

#include "awp/checkpoint.hpp"
#include "awp/error.hpp"
#include "awp/report.hpp"

namespace awp::cli {

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("SHA-256 unavailable");
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<size_t>(in.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[md[i] >> 4];
        out += kHex[md[i] & 15];
    }
    return out;
}

std::filesystem::path make_run_dir(const std::string& out, const std::string& tag) {
    std::filesystem::path dir = out;
    if (out.empty()) {
        std::string ts = utc_timestamp();
        std::erase(ts, ':');
        std::erase(ts, '-');
        dir = std::filesystem::path("runs") / (ts + "-" + tag);
        for (int n = 2; std::filesystem::exists(dir); ++n) {
            dir = std::filesystem::path("runs") / (ts + "-" + tag + "-" + std::to_string(n));
        }
    }
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    return dir;
}

nlohmann::json RunManifest::to_json() const {
    return nlohmann::json{
        {"command", command},
        {"argv", argv},
        {"config_file", config_file},
        {"config", config},
        {"sources", sources},
        {"seeds", seeds},
        {"inputs", inputs},
        {"outputs", outputs},
        {"failures", failures},
        {"started_at", started_at},
        {"finished_at", finished_at},
        {"formats", {{"checkpoint", Checkpoint::kVersion}, {"dataset", 1}, {"report", 1}}},
    };
}

void RunManifest::write(const std::filesystem::path& dir) {
    finished_at = utc_timestamp();
    const auto path = dir / "manifest.json";
    const auto tmp = dir / "manifest.json.tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out << to_json().dump(2) << '\n';
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

}  // namespace awp::cli
