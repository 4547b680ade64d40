#include "regimeflow/manifest.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>
#include <gsl/gsl_version.h>
#include <json.hpp>
#include <openssl/evp.h>
#include <openssl/opensslv.h>

#include <array>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "regimeflow/types.hpp"

namespace regimeflow::manifest {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string hex(const unsigned char* data, unsigned int n) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * n);
  for (unsigned int i = 0; i < n; ++i) {
    out.push_back(kDigits[data[i] >> 4]);
    out.push_back(kDigits[data[i] & 0xF]);
  }
  return out;
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      throw Error(ErrorCode::Io, "sha256: digest initialisation failed");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_, data, n); }
  std::string finish() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md.data(), &len);
    return hex(md.data(), len);
  }

 private:
  EVP_MD_CTX* ctx_;
};

json read_manifest(const fs::path& dir) {
  const auto path = dir / kManifestName;
  if (!fs::exists(path)) return json{{"tool", "regimeflow"}, {"runs", json::object()}};
  std::ifstream in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Io, "corrupt manifest " + path.string() + ": " + e.what());
  }
}

Entry from_json(const std::string& command, const json& j) {
  Entry e;
  e.command = command;
  e.config_hash = j.value("config_hash", "");
  e.config_text = j.value("config", "");
  e.seed = j.value("seed", std::uint64_t{0});
  e.threads = j.value("threads", 0);
  if (j.contains("inputs")) e.inputs = j["inputs"].get<std::map<std::string, std::string>>();
  if (j.contains("outputs")) e.outputs = j["outputs"].get<std::map<std::string, std::string>>();
  return e;
}

fs::path resolve(const fs::path& dir, const std::string& name) {
  const fs::path p(name);
  return p.is_absolute() ? p : dir / p;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.finish();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  Sha256 h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.finish();
}

void write_atomic(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::map<std::string, std::string> library_versions() {
  return {
      {"regimeflow", std::string(kToolVersion)},
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                    std::to_string(EIGEN_MINOR_VERSION)},
      {"gsl", GSL_VERSION},
      {"boost", BOOST_LIB_VERSION},
      {"openssl", OPENSSL_VERSION_TEXT},
  };
}

std::string relative_name(const fs::path& dir, const fs::path& path) {
  const auto abs_dir = fs::weakly_canonical(fs::absolute(dir));
  const auto abs_path = fs::weakly_canonical(fs::absolute(path));
  const auto rel = abs_path.lexically_relative(abs_dir);
  if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return abs_path.generic_string();
}

void record(const fs::path& dir, const Entry& entry) {
  auto doc = read_manifest(dir);
  doc["tool"] = "regimeflow";
  doc["versions"] = library_versions();
  json run;
  run["config_hash"] = entry.config_hash;
  run["config"] = entry.config_text;
  run["seed"] = entry.seed;
  run["threads"] = entry.threads;
  run["inputs"] = entry.inputs;
  run["outputs"] = entry.outputs;
  doc["runs"][entry.command] = run;
  write_atomic(dir / kManifestName, doc.dump(2) + "\n");
}

std::optional<Entry> find(const fs::path& dir, const std::string& command) {
  if (!fs::exists(dir / kManifestName)) return std::nullopt;
  const auto doc = read_manifest(dir);
  if (!doc.contains("runs") || !doc["runs"].contains(command)) return std::nullopt;
  return from_json(command, doc["runs"][command]);
}

std::vector<Entry> entries(const fs::path& dir) {
  std::vector<Entry> out;
  if (!fs::exists(dir / kManifestName)) return out;
  const auto doc = read_manifest(dir);
  if (!doc.contains("runs")) return out;
  for (const auto& [command, run] : doc["runs"].items()) out.push_back(from_json(command, run));
  return out;
}

Verification verify(const fs::path& dir) {
  Verification v;
  for (const auto& e : entries(dir)) {
    auto check = [&](const std::map<std::string, std::string>& files, const char* role) {
      for (const auto& [name, digest] : files) {
        const auto path = resolve(dir, name);
        if (!fs::exists(path)) {
          v.problems.push_back(e.command + ": " + role + " " + name + " is missing");
        } else if (sha256_file(path) != digest) {
          v.problems.push_back(e.command + ": " + role + " " + name + " changed since it was recorded");
        }
      }
    };
    check(e.inputs, "input");
    check(e.outputs, "output");
  }
  v.ok = v.problems.empty();
  return v;
}

}  // namespace regimeflow::manifest
