#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "loadcycle/nn/model.hpp"

namespace loadcycle::service {

struct ModelVersion {
  int version = 0;
  std::string file;    // relative to the registry directory
  std::string digest;  // SHA-256 of the model file, hex
  std::string note;
};

// Directory of model files plus an append-only manifest.log:
//   add <version> <file> <digest> <note...>
//   active <version> <promote|rollback|initial|repair>
// Replaying the manifest rebuilds the state; the last "active" line wins.
class Registry {
 public:
  explicit Registry(std::filesystem::path dir);

  // Stores a new version; the very first version becomes active.
  int add(const nn::Model& model, const std::string& note);
  void promote(int version);   // throws unknown_version
  void rollback(int version);  // throws unknown_version

  std::vector<ModelVersion> list() const;
  std::optional<int> active() const;
  bool empty() const;

  nn::Model load(int version) const;  // verifies the digest
  std::optional<nn::Model> load_active() const;

  const std::filesystem::path& dir() const { return dir_; }
  static constexpr const char* kManifest = "manifest.log";

 private:
  void replay();
  void append_line(const std::string& line);
  void activate(int version, const char* why);
  const ModelVersion* find(int version) const;

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::vector<ModelVersion> versions_;
  std::optional<int> active_;
};

std::string sha256_hex(const std::vector<std::uint8_t>& bytes);

}  // namespace loadcycle::service
