#pragma once

// 8-bit grayscale image files. Covered pixels are black (0), paper is
// white (255). Format follows the extension: .png or .pgm.

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ptex/raster.hpp"

namespace ptex {

class ImageIoError : public std::runtime_error {
public:
    ImageIoError(const std::filesystem::path& path, const std::string& what)
        : std::runtime_error(path.string() + ": " + what) {}
};

inline std::uint8_t coverage_to_gray(double c) {
    return static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - std::clamp(c, 0.0, 1.0))));
}

inline double gray_to_coverage(std::uint8_t g) { return 1.0 - g / 255.0; }

inline std::vector<std::uint8_t> to_gray(const Raster& r) {
    std::vector<std::uint8_t> out(r.size());
    auto v = r.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = coverage_to_gray(v[i]);
    return out;
}

inline Raster from_gray(int width, int height, const std::vector<std::uint8_t>& gray) {
    Raster r(width, height);
    auto v = r.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = gray_to_coverage(gray[i]);
    return r;
}

namespace detail {

inline std::string lower_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext;
}

inline void write_png(const std::filesystem::path& path, const Raster& r) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(r.width());
    image.height = static_cast<png_uint_32>(r.height());
    image.format = PNG_FORMAT_GRAY;
    const auto gray = to_gray(r);
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, gray.data(), 0, nullptr))
        throw ImageIoError(path, std::string("png write failed: ") + image.message);
}

inline Raster read_png(const std::filesystem::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str()))
        throw ImageIoError(path, std::string("png read failed: ") + image.message);
    image.format = PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> gray(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, gray.data(), 0, nullptr)) {
        png_image_free(&image);
        throw ImageIoError(path, std::string("png decode failed: ") + image.message);
    }
    return from_gray(static_cast<int>(image.width), static_cast<int>(image.height), gray);
}

inline void write_pgm(const std::filesystem::path& path, const Raster& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ImageIoError(path, "cannot open for writing");
    out << "P5\n" << r.width() << ' ' << r.height() << "\n255\n";
    const auto gray = to_gray(r);
    out.write(reinterpret_cast<const char*>(gray.data()), static_cast<std::streamsize>(gray.size()));
    if (!out) throw ImageIoError(path, "write failed");
}

inline Raster read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageIoError(path, "cannot open for reading");
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic;
    auto skip_comments = [&] {
        in >> std::ws;
        while (in.peek() == '#') {
            std::string line;
            std::getline(in, line);
            in >> std::ws;
        }
    };
    skip_comments();
    in >> w;
    skip_comments();
    in >> h;
    skip_comments();
    in >> maxval;
    if (!in || magic != "P5" || w <= 0 || h <= 0 || maxval != 255)
        throw ImageIoError(path, "not an 8-bit binary PGM");
    in.get();
    std::vector<std::uint8_t> gray(static_cast<std::size_t>(w) * h);
    in.read(reinterpret_cast<char*>(gray.data()), static_cast<std::streamsize>(gray.size()));
    if (in.gcount() != static_cast<std::streamsize>(gray.size()))
        throw ImageIoError(path, "truncated pixel data");
    return from_gray(w, h, gray);
}

}  // namespace detail

inline void write_image(const std::filesystem::path& path, const Raster& r) {
    require_valid(r);
    const auto ext = detail::lower_extension(path);
    if (ext == ".png") return detail::write_png(path, r);
    if (ext == ".pgm") return detail::write_pgm(path, r);
    throw ImageIoError(path, "unsupported image extension '" + ext + "'");
}

inline Raster read_image(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ImageIoError(path, "file does not exist");
    const auto ext = detail::lower_extension(path);
    if (ext == ".png") return detail::read_png(path);
    if (ext == ".pgm") return detail::read_pgm(path);
    throw ImageIoError(path, "unsupported image extension '" + ext + "'");
}

}  // namespace ptex
