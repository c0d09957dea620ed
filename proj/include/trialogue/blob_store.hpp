#pragma once

// Content-addressed audio storage. A reference is "<sha256 hex>.<container>",
// so identical audio always maps to the same reference.

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "trialogue/util.hpp"

namespace trialogue {

class BlobStore {
 public:
  virtual ~BlobStore() = default;
  virtual std::string put(std::string_view bytes, std::string_view container) = 0;
  virtual std::optional<std::string> get(std::string_view ref) const = 0;

  static std::string make_ref(std::string_view bytes, std::string_view container) {
    return util::sha256_hex(bytes) + "." + std::string(container);
  }

  // Refs are untrusted on lookup paths; only [0-9a-f]+.[a-z0-9]+ is accepted.
  static bool is_valid_ref(std::string_view ref) {
    const auto dot = ref.find('.');
    if (dot == std::string_view::npos || dot == 0 || dot + 1 == ref.size()) return false;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const char c = ref[i];
      if (i == dot) continue;
      const bool ok = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z');
      if (!ok || (i < dot && c > 'f')) return false;
    }
    return true;
  }
};

class InMemoryBlobStore final : public BlobStore {
 public:
  std::string put(std::string_view bytes, std::string_view container) override {
    auto ref = make_ref(bytes, container);
    std::lock_guard lock(mu_);
    blobs_.try_emplace(ref, bytes);
    return ref;
  }

  std::optional<std::string> get(std::string_view ref) const override {
    std::lock_guard lock(mu_);
    auto it = blobs_.find(ref);
    if (it == blobs_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return blobs_.size();
  }

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::string, std::less<>> blobs_;
};

class DirectoryBlobStore final : public BlobStore {
 public:
  explicit DirectoryBlobStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  std::string put(std::string_view bytes, std::string_view container) override {
    auto ref = make_ref(bytes, container);
    const auto path = dir_ / ref;
    std::lock_guard lock(mu_);
    if (!std::filesystem::exists(path)) {
      const auto tmp = dir_ / (ref + ".tmp");
      {
        std::ofstream out(tmp, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("cannot write blob " + tmp.string());
      }
      std::filesystem::rename(tmp, path);
    }
    return ref;
  }

  std::optional<std::string> get(std::string_view ref) const override {
    if (!is_valid_ref(ref)) return std::nullopt;
    std::ifstream in(dir_ / std::string(ref), std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::mutex mu_;
};

}  // namespace trialogue
