#include "jpeg_codec.hpp"

#include "replayq/error.hpp"

#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <cstring>

#include <jpeglib.h>

namespace replayq::detail {

namespace {

struct ErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void on_error(j_common_ptr cinfo) {
  auto *err = reinterpret_cast<ErrorManager *>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

void silence(j_common_ptr) {}

} // namespace

bool looks_like_jpeg(std::string_view bytes) {
  return bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xFF &&
         static_cast<unsigned char>(bytes[1]) == 0xD8 && static_cast<unsigned char>(bytes[2]) == 0xFF;
}

RasterImage decode_jpeg(std::string_view bytes) {
  jpeg_decompress_struct cinfo{};
  ErrorManager err{};
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = on_error;
  err.pub.output_message = silence;
  RasterImage image;
  // no C++ objects with non-trivial destructors are created between setjmp and longjmp
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw ValidationError(std::string("JPEG decode failed: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, reinterpret_cast<const unsigned char *>(bytes.data()), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);
  image.width = static_cast<int>(cinfo.output_width);
  image.height = static_cast<int>(cinfo.output_height);
  image.channels = cinfo.output_components;
  image.pixels.resize(static_cast<std::size_t>(image.width) * image.height * image.channels);
  const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = image.pixels.data() + cinfo.output_scanline * stride;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return image;
}

namespace {

// Reads one whitespace-delimited ASCII integer from a PNM header, skipping comments.
bool pnm_int(std::string_view bytes, std::size_t &pos, int &value) {
  while (pos < bytes.size()) {
    const char c = bytes[pos];
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      ++pos;
    } else {
      break;
    }
  }
  if (pos >= bytes.size() || bytes[pos] < '0' || bytes[pos] > '9') return false;
  long v = 0;
  while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
    v = v * 10 + (bytes[pos] - '0');
    if (v > 1 << 20) return false;
    ++pos;
  }
  value = static_cast<int>(v);
  return true;
}

} // namespace

RasterImage decode_pnm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw ValidationError("payload is neither JPEG nor binary PGM/PPM");
  RasterImage image;
  image.channels = bytes[1] == '5' ? 1 : 3;
  std::size_t pos = 2;
  int maxval = 0;
  if (!pnm_int(bytes, pos, image.width) || !pnm_int(bytes, pos, image.height) || !pnm_int(bytes, pos, maxval))
    throw ValidationError("malformed PNM header");
  if (maxval != 255 || image.width <= 0 || image.height <= 0)
    throw ValidationError("unsupported PNM (need maxval 255 and positive size)");
  ++pos; // single whitespace before raster
  const std::size_t need = static_cast<std::size_t>(image.width) * image.height * image.channels;
  if (bytes.size() < pos + need) throw ValidationError("truncated PNM raster");
  image.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                      bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return image;
}

std::string encode_jpeg(const RasterImage &image, int quality) {
  jpeg_compress_struct cinfo{};
  ErrorManager err{};
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = on_error;
  err.pub.output_message = silence;
  unsigned char *buffer = nullptr;
  unsigned long size = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::free(buffer);
    throw ValidationError(std::string("JPEG encode failed: ") + err.message);
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buffer, &size);
  cinfo.image_width = static_cast<JDIMENSION>(image.width);
  cinfo.image_height = static_cast<JDIMENSION>(image.height);
  cinfo.input_components = image.channels;
  cinfo.in_color_space = image.channels == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
  while (cinfo.next_scanline < cinfo.image_height) {
    auto row = const_cast<JSAMPROW>(image.pixels.data() + cinfo.next_scanline * stride);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::string out(reinterpret_cast<const char *>(buffer), size);
  std::free(buffer);
  return out;
}

} // namespace replayq::detail
