#include "idsr/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "idsr/error.hpp"

namespace idsr {

namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return ext;
}

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::io_failure, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Image decode_png(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    fail(Errc::corrupt_data, path.string() + ": " + image.message);

  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<unsigned char> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    const std::string message = image.message;
    png_image_free(&image);
    fail(Errc::corrupt_data, path.string() + ": " + message);
  }

  Image out(static_cast<int>(image.height), static_cast<int>(image.width), channels);
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(pixels[i]) / 255.0f;
  return out;
}

// Netpbm header token reader: skips whitespace and '#' comments.
class PnmHeader {
 public:
  PnmHeader(const std::vector<unsigned char>& bytes, const std::filesystem::path& path)
      : bytes_(bytes), path_(path) {}

  int next_int() {
    skip_space();
    require(pos_ < bytes_.size() && std::isdigit(bytes_[pos_]), Errc::corrupt_data,
            path_.string() + ": malformed netpbm header");
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      require(value < (1L << 24), Errc::corrupt_data, path_.string() + ": header value too large");
      ++pos_;
    }
    return static_cast<int>(value);
  }

  // exactly one whitespace byte separates the header from the raster
  std::size_t raster_offset() {
    require(pos_ < bytes_.size() && std::isspace(bytes_[pos_]), Errc::corrupt_data,
            path_.string() + ": malformed netpbm header");
    return pos_ + 1;
  }

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char>& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 2;
};

Image decode_pnm(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
  const int channels = bytes[1] == '5' ? 1 : 3;
  PnmHeader header(bytes, path);
  const int width = header.next_int();
  const int height = header.next_int();
  const int maxval = header.next_int();
  require(width > 0 && height > 0, Errc::corrupt_data, path.string() + ": zero-sized netpbm");
  require(maxval == 255, Errc::unsupported_format,
          path.string() + ": only 8-bit netpbm (maxval 255) is supported");
  const std::size_t offset = header.raster_offset();
  const std::size_t count =
      static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * channels;
  require(bytes.size() >= offset + count, Errc::corrupt_data, path.string() + ": truncated raster");

  Image out(height, width, channels);
  auto dst = out.data();
  for (std::size_t i = 0; i < count; ++i) dst[i] = static_cast<float>(bytes[offset + i]) / 255.0f;
  return out;
}

std::vector<unsigned char> quantize(const Image& img) {
  std::vector<unsigned char> bytes(img.size());
  auto src = img.data();
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = quantize_sample(src[i]);
  return bytes;
}

void write_bytes(const std::filesystem::path& path, const std::string& header,
                 const std::vector<unsigned char>& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), Errc::io_failure, "cannot write " + path.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
  require(static_cast<bool>(out), Errc::io_failure, "short write to " + path.string());
}

}  // namespace

unsigned char quantize_sample(float v) {
  const double clamped = std::clamp(static_cast<double>(v), 0.0, 1.0);
  return static_cast<unsigned char>(std::floor(clamped * 255.0 + 0.5));
}

Image load_image(const std::filesystem::path& path) {
  std::error_code ec;
  require(std::filesystem::is_regular_file(path, ec), Errc::missing_file, path.string());
  const std::vector<unsigned char> bytes = read_all(path);
  require(bytes.size() >= 8, Errc::corrupt_data, path.string() + ": file too short");

  static constexpr unsigned char kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (std::equal(std::begin(kPngSignature), std::end(kPngSignature), bytes.begin()))
    return decode_png(bytes, path);
  if (bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) return decode_pnm(bytes, path);
  fail(Errc::unsupported_format, path.string() + ": not a PNG or binary PGM/PPM file");
}

void save_image(const Image& img, const std::filesystem::path& path) {
  require(!img.empty(), Errc::invalid_argument, "cannot save an empty image");
  const std::string ext = lower_extension(path);
  const std::vector<unsigned char> bytes = quantize(img);
  const std::string dims = std::to_string(img.width()) + " " + std::to_string(img.height());

  if (ext == ".pgm") {
    require(img.channels() == 1, Errc::unsupported_format, "PGM holds one channel");
    write_bytes(path, "P5\n" + dims + "\n255\n", bytes);
  } else if (ext == ".ppm") {
    require(img.channels() == 3, Errc::unsupported_format, "PPM holds three channels");
    write_bytes(path, "P6\n" + dims + "\n255\n", bytes);
  } else if (ext == ".png") {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, bytes.data(), 0, nullptr))
      fail(Errc::io_failure, path.string() + ": " + image.message);
  } else {
    fail(Errc::unsupported_format, path.string() + ": extension must be .png, .pgm or .ppm");
  }
}

}  // namespace idsr
