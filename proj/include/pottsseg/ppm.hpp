#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "pottsseg/observation.hpp"

namespace pottsseg {

namespace detail {

inline std::string ppm_token(const std::string& data, size_t& pos) {
  while (pos < data.size()) {
    const char c = data[pos];
    if (c == '#') {
      while (pos < data.size() && data[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
  if (pos >= data.size())
    throw std::runtime_error("unexpected end of header at byte " + std::to_string(pos));
  const size_t start = pos;
  while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos])) &&
         data[pos] != '#')
    ++pos;
  return data.substr(start, pos - start);
}

inline int ppm_int(const std::string& data, size_t& pos, const char* what) {
  const size_t at = pos;
  const std::string tok = ppm_token(data, pos);
  int value = 0;
  for (char c : tok) {
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw std::runtime_error(std::string("bad ") + what + " '" + tok + "' at byte " +
                               std::to_string(at));
    value = value * 10 + (c - '0');
    if (value > 1 << 26)
      throw std::runtime_error(std::string(what) + " out of range at byte " + std::to_string(at));
  }
  if (tok.empty())
    throw std::runtime_error(std::string("missing ") + what + " at byte " + std::to_string(at));
  return value;
}

}  // namespace detail

// binary pixmap (P6) with 8-bit samples; channels normalized to [0, 1]
inline ColorImage read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  size_t pos = 0;
  const std::string magic = detail::ppm_token(data, pos);
  if (magic != "P6")
    throw std::runtime_error("unsupported magic '" + magic + "' at byte 0 (need binary P6)");
  const int w = detail::ppm_int(data, pos, "width");
  const int h = detail::ppm_int(data, pos, "height");
  if (w < 1 || h < 1 || static_cast<long long>(w) * h > (1 << 24))
    throw std::runtime_error("unreasonable dimensions " + std::to_string(w) + "x" +
                             std::to_string(h));
  const size_t maxval_at = pos;
  const int maxval = detail::ppm_int(data, pos, "maxval");
  if (maxval != 255)
    throw std::runtime_error("maxval " + std::to_string(maxval) + " at byte " +
                             std::to_string(maxval_at) + " not supported (need 255)");
  if (pos >= data.size() || !std::isspace(static_cast<unsigned char>(data[pos])))
    throw std::runtime_error("missing whitespace after maxval at byte " + std::to_string(pos));
  ++pos;
  const size_t need = static_cast<size_t>(w) * h * 3;
  if (data.size() - pos < need)
    throw std::runtime_error("truncated pixel data at byte " + std::to_string(pos) + ": need " +
                             std::to_string(need) + " bytes, have " +
                             std::to_string(data.size() - pos));
  ColorImage img{w, h, {}};
  img.pixels.resize(static_cast<size_t>(w) * h);
  for (size_t i = 0; i < img.pixels.size(); ++i)
    for (int c = 0; c < 3; ++c)
      img.pixels[i](c) = static_cast<unsigned char>(data[pos + 3 * i + c]) / 255.0;
  return img;
}

inline void write_ppm(const ColorImage& img, const std::string& path) {
  if (img.width < 1 || img.height < 1 ||
      img.pixels.size() != static_cast<size_t>(img.width) * img.height)
    throw std::invalid_argument("image dimensions do not match pixel count");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::string payload(img.pixels.size() * 3, '\0');
  for (size_t i = 0; i < img.pixels.size(); ++i)
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(img.pixels[i](c), 0.0, 1.0);
      payload[3 * i + c] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace pottsseg
