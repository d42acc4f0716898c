#include "phagoq/pipeline/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>

#include "phagoq/error.hpp"

namespace phagoq::pipeline {

namespace fs = std::filesystem;

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw IoError("sha256 init failed");
  }
  void update(const void* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw IoError("sha256 update failed");
  }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), md, &len) != 1) throw IoError("sha256 final failed");
    static const char* digits = "0123456789abcdef";
    std::string s;
    for (unsigned int i = 0; i < len; ++i) {
      s += digits[md[i] >> 4];
      s += digits[md[i] & 15];
    }
    return s;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, void (*)(EVP_MD_CTX*)> ctx_;
};

std::string yaml_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

std::string indent(const std::string& text, const std::string& pad) {
  std::string out;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto end = text.find('\n', start);
    out += pad + text.substr(start, end - start) + "\n";
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  Sha256 h;
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

fs::path write_run_manifest(const PipelineConfig& config, const std::vector<ingest::SceneManifest>& scenes,
                            const RunRecord& record) {
  fs::create_directories(config.run.output);
  const fs::path path = config.run.output / ("run_manifest_" + record.subcommand + ".yaml");
  std::string y;
  y += "phagoq_run_manifest: 1\n";
  y += "version: " + yaml_quote(PHAGOQ_VERSION) + "\n";
  y += "subcommand: " + yaml_quote(record.subcommand) + "\n";
  y += "arguments: [";
  for (std::size_t i = 0; i < record.arguments.size(); ++i) y += (i ? ", " : "") + yaml_quote(record.arguments[i]);
  y += "]\n";
  y += "config_fingerprint: " + yaml_quote(config_fingerprint(config)) + "\n";
  y += "config:\n" + indent(to_yaml(config), "  ");
  y += "inputs:\n";
  for (const auto& s : scenes) {
    // One digest over "<channel>/<file> <sha256>" lines in frame order.
    std::string lines;
    std::size_t files = 0;
    for (auto ch : {ingest::Channel::Aggregates, ingest::Channel::Cells, ingest::Channel::Probability}) {
      for (const auto& p : s.paths(ch)) {
        lines += std::string(ingest::channel_name(ch)) + "/" + p.filename().string() + " " + sha256_file(p) + "\n";
        ++files;
      }
    }
    y += "  - scene: " + yaml_quote(s.key()) + "\n";
    y += "    frames: " + std::to_string(s.frame_count) + "\n";
    y += "    files: " + std::to_string(files) + "\n";
    y += "    sha256: " + yaml_quote(sha256_hex(lines)) + "\n";
  }
  if (!record.outcomes.empty()) {
    y += "outcomes:\n";
    for (const auto& o : record.outcomes) {
      y += "  - scene: " + yaml_quote(o.key) + "\n    status: " + o.status + "\n";
      if (!o.error.empty()) y += "    error: " + yaml_quote(o.error) + "\n";
    }
  }
  if (!record.notes.empty()) {
    y += "notes:\n";
    for (const auto& n : record.notes) y += "  - " + yaml_quote(n) + "\n";
  }
  std::ofstream out(path, std::ios::binary);
  out << y;
  if (!out) throw IoError("cannot write " + path.string());
  return path;
}

}  // namespace phagoq::pipeline
