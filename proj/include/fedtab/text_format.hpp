#pragma once

// Numeric text primitives shared by ingestion and serialization.
//
// render_fixed4 rounds half-to-even at the fourth decimal using exact
// integer arithmetic on the binary representation, so output bytes do not
// depend on the platform's printf rounding.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace fedtab::detail {

// full-token finite double parse; rejects hex, inf, nan, trailing junk
inline bool parse_number(std::string_view token, double& out) {
  if (token.empty()) return false;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) return false;
  if (!std::isfinite(v)) return false;
  out = v;
  return true;
}

inline std::string u128_to_string(unsigned __int128 v) {
  if (v == 0) return "0";
  char buf[40];
  int i = 40;
  while (v > 0) {
    buf[--i] = static_cast<char>('0' + static_cast<unsigned>(v % 10));
    v /= 10;
  }
  return std::string(buf + i, buf + 40);
}

}  // namespace fedtab::detail

namespace fedtab {

// |v| * 10^4 rounded half-to-even, computed exactly from the mantissa.
// Requires |v| < 2^110 or so; larger magnitudes fall back to printf, where
// the scaled value is an exact integer and no rounding decision remains.
inline std::string render_fixed4(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";

  const bool neg = std::signbit(v);
  const double a = std::fabs(v);

  int e2 = 0;
  const double frac = std::frexp(a, &e2);            // a = frac * 2^e2, frac in [0.5, 1)
  const auto m = static_cast<uint64_t>(std::ldexp(frac, 53));  // exact 53-bit mantissa
  const int e = e2 - 53;                             // a = m * 2^e

  unsigned __int128 n = 0;  // round(a * 10^4)
  const unsigned __int128 scaled = static_cast<unsigned __int128>(m) * 10000u;  // < 2^67
  if (e >= 0) {
    if (e > 55) {  // a*10^4 exceeds 128-bit headroom; value is a huge exact integer
      char buf[512];
      std::snprintf(buf, sizeof(buf), "%.4f", v);
      return buf;
    }
    n = scaled << e;
  } else {
    const int k = -e;
    if (k <= 66) {
      unsigned __int128 q = scaled >> k;
      const unsigned __int128 r = scaled - (q << k);
      const unsigned __int128 half = static_cast<unsigned __int128>(1) << (k - 1);
      if (r > half || (r == half && (q & 1))) ++q;
      n = q;
    } else if (k <= 127) {
      // quotient is zero; only the half comparison remains
      const unsigned __int128 half = static_cast<unsigned __int128>(1) << (k - 1);
      n = scaled > half ? 1 : 0;
    } else {
      n = 0;
    }
  }

  const unsigned __int128 whole = n / 10000u;
  const auto fracpart = static_cast<unsigned>(n % 10000u);
  char fbuf[5];
  std::snprintf(fbuf, sizeof(fbuf), "%04u", fracpart);

  std::string out;
  if (neg && n > 0) out += '-';  // never emit "-0.0000"
  out += detail::u128_to_string(whole);
  out += '.';
  out += fbuf;
  return out;
}

}  // namespace fedtab
