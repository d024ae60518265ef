#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "advx/image.hpp"

namespace advx {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 8-bit single channel raster (label masks, binary skin masks).
using GrayImage = Raster<std::uint8_t>;

// PNG encoding is deterministic: fixed zlib level, no tIME/text chunks.
std::vector<std::uint8_t> encode_png(const RgbImage& img);
std::vector<std::uint8_t> encode_png(const GrayImage& img);

/// Decodes any PNG into 8-bit RGB (palette/gray expanded, alpha dropped, 16-bit stripped).
RgbImage decode_png_rgb(std::span<const std::uint8_t> bytes);
/// Decodes into 8-bit gray. Color inputs are reduced by taking the red channel,
/// which is exact for label images written as RGB with equal channels.
GrayImage decode_png_gray(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

RgbImage read_png_rgb(const std::filesystem::path& path);
GrayImage read_png_gray(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& img);
void write_png(const std::filesystem::path& path, const GrayImage& img);

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws std::invalid_argument on characters outside the standard alphabet.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace advx
