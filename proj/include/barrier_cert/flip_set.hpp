#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace barrier_cert {

/// Fixed-width bitset over the N hyperplanes of an arrangement. Bit i set
/// means the region lies on the positive side of hyperplane i.
class FlipSet {
 public:
  FlipSet() = default;
  explicit FlipSet(std::size_t n) : size_(n), words_((n + 63) / 64, 0) {}

  static FlipSet from_indices(std::size_t n, const std::vector<std::size_t>& idx) {
    FlipSet f(n);
    for (auto i : idx) f.set(i);
    return f;
  }

  std::size_t size() const { return size_; }

  bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1U; }
  void set(std::size_t i, bool v = true) {
    const std::uint64_t mask = std::uint64_t{1} << (i & 63);
    if (v) {
      words_[i >> 6] |= mask;
    } else {
      words_[i >> 6] &= ~mask;
    }
  }
  void flip(std::size_t i) { words_[i >> 6] ^= std::uint64_t{1} << (i & 63); }

  FlipSet flipped(std::size_t i) const {
    FlipSet f = *this;
    f.flip(i);
    return f;
  }

  /// +1 if flipped, -1 otherwise.
  double sign(std::size_t i) const { return test(i) ? 1.0 : -1.0; }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }

  FlipSet operator^(const FlipSet& o) const {
    FlipSet f = *this;
    for (std::size_t k = 0; k < words_.size(); ++k) f.words_[k] ^= o.words_[k];
    return f;
  }

  std::vector<std::size_t> flipped_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size_; ++i) {
      if (test(i)) out.push_back(i);
    }
    return out;
  }

  std::vector<std::size_t> unflipped_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size_; ++i) {
      if (!test(i)) out.push_back(i);
    }
    return out;
  }

  /// "0101..." with character i describing hyperplane i.
  std::string to_string() const {
    std::string s(size_, '0');
    for (std::size_t i = 0; i < size_; ++i) {
      if (test(i)) s[i] = '1';
    }
    return s;
  }

  const std::vector<std::uint64_t>& words() const { return words_; }

  friend bool operator==(const FlipSet& a, const FlipSet& b) {
    return a.size_ == b.size_ && a.words_ == b.words_;
  }

  /// Total order used to sort levels deterministically: by hyperplane
  /// count, then word-wise.
  friend bool operator<(const FlipSet& a, const FlipSet& b) {
    if (a.size_ != b.size_) return a.size_ < b.size_;
    for (std::size_t k = a.words_.size(); k-- > 0;) {
      if (a.words_[k] != b.words_[k]) return a.words_[k] < b.words_[k];
    }
    return false;
  }

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

struct FlipSetHash {
  std::size_t operator()(const FlipSet& f) const noexcept {
    std::size_t h = std::hash<std::size_t>{}(f.size());
    for (auto w : f.words()) {
      h ^= std::hash<std::uint64_t>{}(w) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
  }
};

}  // namespace barrier_cert
