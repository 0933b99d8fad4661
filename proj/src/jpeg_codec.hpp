#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace replayq::detail {

struct RasterImage {
  int width = 0;
  int height = 0;
  int channels = 0; // 1 or 3
  std::vector<std::uint8_t> pixels;
};

bool looks_like_jpeg(std::string_view bytes);

RasterImage decode_jpeg(std::string_view bytes);
/// Binary PGM (P5) or PPM (P6) with maxval 255.
RasterImage decode_pnm(std::string_view bytes);
std::string encode_jpeg(const RasterImage &image, int quality);

} // namespace replayq::detail
