#include "loschmidt/rng.hpp"

#include <cmath>

namespace loschmidt {

namespace {

constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

inline std::uint64_t mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t* hi) {
  const unsigned __int128 prod =
      static_cast<unsigned __int128>(a) * static_cast<unsigned __int128>(b);
  *hi = static_cast<std::uint64_t>(prod >> 64);
  return static_cast<std::uint64_t>(prod);
}

inline void round_once(std::array<std::uint64_t, 4>& ctr,
                       const std::array<std::uint64_t, 2>& key) {
  std::uint64_t hi0, hi1;
  const std::uint64_t lo0 = mulhilo(kMul0, ctr[0], &hi0);
  const std::uint64_t lo1 = mulhilo(kMul1, ctr[2], &hi1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

}  // namespace

std::array<std::uint64_t, 4> philox4x64(const std::array<std::uint64_t, 2>& key,
                                        const std::array<std::uint64_t, 4>& counter) {
  std::array<std::uint64_t, 4> ctr = counter;
  std::array<std::uint64_t, 2> k = key;
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    round_once(ctr, k);
  }
  return ctr;
}

std::array<std::uint64_t, 4> CounterRng::raw(std::uint64_t index, std::uint64_t block) const {
  return philox4x64(key_, {index, block, 0, 0});
}

void CounterRng::uniforms(std::uint64_t index, double* out, int n) const {
  // (x >> 11) keeps the top 53 bits; +1 shifts the lattice to (0, 1] so that
  // log(u) below is always finite.
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  std::uint64_t block = 0;
  int produced = 0;
  while (produced < n) {
    const auto words = raw(index, block++);
    for (int i = 0; i < 4 && produced < n; ++i) {
      out[produced++] = static_cast<double>((words[i] >> 11) + 1) * kScale;
    }
  }
}

void CounterRng::gaussians(std::uint64_t index, double* out, int n) const {
  const int pairs = (n + 1) / 2;
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  std::uint64_t block = 0;
  std::array<std::uint64_t, 4> words{};
  int word_pos = 4;  // force initial refill
  auto next_uniform = [&]() {
    if (word_pos == 4) {
      words = raw(index, block++);
      word_pos = 0;
    }
    constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
    return static_cast<double>((words[word_pos++] >> 11) + 1) * kScale;
  };
  int produced = 0;
  for (int p = 0; p < pairs; ++p) {
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double z0 = r * std::cos(kTwoPi * u2);
    const double z1 = r * std::sin(kTwoPi * u2);
    out[produced++] = z0;
    if (produced < n) out[produced++] = z1;
  }
}

}  // namespace loschmidt
