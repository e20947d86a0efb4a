#include "loadcycle/service/registry.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "loadcycle/error.hpp"
#include "loadcycle/nn/serialize.hpp"

namespace loadcycle::service {

namespace fs = std::filesystem;

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    fail(ErrorCode::io_failure, "sha256 failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

namespace {

std::vector<std::uint8_t> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorCode::io_failure, "cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Registry::Registry(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (!fs::is_directory(dir_)) fail(ErrorCode::io_failure, "registry directory unavailable: " + dir_.string());
  replay();
}

void Registry::replay() {
  const fs::path manifest = dir_ / kManifest;
  std::ifstream in(manifest);
  std::string line;
  std::uintmax_t complete = 0;  // bytes of newline-terminated lines
  bool torn = false;
  while (std::getline(in, line)) {
    if (in.eof()) {
      // A final line without a newline was cut short by a crash.
      torn = !line.empty();
      break;
    }
    complete += line.size() + 1;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "add") {
      ModelVersion v;
      if (!(ls >> v.version >> v.file >> v.digest)) continue;
      std::getline(ls >> std::ws, v.note);
      if (!fs::exists(dir_ / v.file) || find(v.version)) continue;
      versions_.push_back(v);
    } else if (kind == "active") {
      int v = 0;
      if ((ls >> v) && find(v)) active_ = v;
    }
  }
  in.close();
  if (torn) {
    std::error_code ec;
    fs::resize_file(manifest, complete, ec);
    if (ec) fail(ErrorCode::io_failure, "cannot repair " + manifest.string());
  }
  if (!versions_.empty() && !active_) activate(versions_.back().version, "repair");
}

void Registry::append_line(const std::string& line) {
  std::ofstream out(dir_ / kManifest, std::ios::app);
  out << line << '\n';
  out.flush();
  if (!out) fail(ErrorCode::io_failure, "cannot append to the registry manifest");
}

const ModelVersion* Registry::find(int version) const {
  for (const auto& v : versions_)
    if (v.version == version) return &v;
  return nullptr;
}

void Registry::activate(int version, const char* why) {
  append_line("active " + std::to_string(version) + " " + why);
  active_ = version;
}

int Registry::add(const nn::Model& model, const std::string& note) {
  std::lock_guard lock(mu_);
  const int version = versions_.empty() ? 1 : versions_.back().version + 1;
  const auto bytes = nn::serialize_model(model);
  ModelVersion v;
  v.version = version;
  v.file = "model_v" + std::to_string(version) + ".lcm";
  v.digest = sha256_hex(bytes);
  for (char c : note) v.note += (c == '\n' || c == '\r') ? ' ' : c;
  const fs::path tmp = dir_ / (v.file + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::io_failure, "cannot write " + tmp.string());
  }
  fs::rename(tmp, dir_ / v.file);
  append_line("add " + std::to_string(version) + " " + v.file + " " + v.digest + " " + v.note);
  versions_.push_back(v);
  if (!active_) activate(version, "initial");
  return version;
}

void Registry::promote(int version) {
  std::lock_guard lock(mu_);
  if (!find(version)) fail(ErrorCode::unknown_version, "no model version " + std::to_string(version));
  activate(version, "promote");
}

void Registry::rollback(int version) {
  std::lock_guard lock(mu_);
  if (!find(version)) fail(ErrorCode::unknown_version, "no model version " + std::to_string(version));
  activate(version, "rollback");
}

std::vector<ModelVersion> Registry::list() const {
  std::lock_guard lock(mu_);
  return versions_;
}

std::optional<int> Registry::active() const {
  std::lock_guard lock(mu_);
  return active_;
}

bool Registry::empty() const {
  std::lock_guard lock(mu_);
  return versions_.empty();
}

nn::Model Registry::load(int version) const {
  ModelVersion v;
  {
    std::lock_guard lock(mu_);
    const auto* p = find(version);
    if (!p) fail(ErrorCode::unknown_version, "no model version " + std::to_string(version));
    v = *p;
  }
  const auto bytes = read_file(dir_ / v.file);
  if (sha256_hex(bytes) != v.digest) fail(ErrorCode::corrupt_file, "digest mismatch for " + v.file);
  return nn::deserialize_model(bytes);
}

std::optional<nn::Model> Registry::load_active() const {
  const auto a = active();
  if (!a) return std::nullopt;
  return load(*a);
}

}  // namespace loadcycle::service
