#pragma once

#include <complex>
#include <cstdio>
#include <optional>
#include <string>

namespace gridsleuth::textio {

// Shortest representation that round-trips a double exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = 0.0;
  std::sscanf(buf, "%lg", &back);
  if (back != v) return std::string(buf);
  for (int prec = 1; prec < 17; ++prec) {
    char probe[40];
    std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
    std::sscanf(probe, "%lg", &back);
    if (back == v) return std::string(probe);
  }
  return std::string(buf);
}

// Complex scalars are written as re+imj with both parts always present,
// e.g. 20-40j, 0+0.035j.
inline std::string format_complex(std::complex<double> z) {
  std::string s = format_double(z.real());
  std::string im = format_double(z.imag());
  if (!im.empty() && im[0] != '-' && im[0] != '+') s += '+';
  s += im;
  s += 'j';
  return s;
}

// Accepts re+imj, a bare real, or a bare imaginary such as 1.5j.
inline std::optional<std::complex<double>> parse_complex(
    const std::string& tok) {
  if (tok.empty()) return std::nullopt;
  if (tok.back() == 'j' || tok.back() == 'J') {
    std::string body = tok.substr(0, tok.size() - 1);
    if (body.empty()) return std::nullopt;
    // Split at the sign that separates the two parts, skipping any sign that
    // belongs to an exponent or leads the string.
    for (size_t i = body.size(); i-- > 1;) {
      char c = body[i];
      if ((c == '+' || c == '-') &&
          body[i - 1] != 'e' && body[i - 1] != 'E') {
        char* end = nullptr;
        std::string re_s = body.substr(0, i), im_s = body.substr(i);
        double re = std::strtod(re_s.c_str(), &end);
        if (end != re_s.c_str() + re_s.size()) return std::nullopt;
        double im = im_s == "+"   ? 1.0
                    : im_s == "-" ? -1.0
                                  : std::strtod(im_s.c_str(), &end);
        if (im_s != "+" && im_s != "-" && end != im_s.c_str() + im_s.size())
          return std::nullopt;
        return std::complex<double>(re, im);
      }
    }
    char* end = nullptr;
    double im = std::strtod(body.c_str(), &end);
    if (end != body.c_str() + body.size()) return std::nullopt;
    return std::complex<double>(0.0, im);
  }
  char* end = nullptr;
  double re = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size() || tok.c_str() == end)
    return std::nullopt;
  return std::complex<double>(re, 0.0);
}

}  // namespace gridsleuth::textio
