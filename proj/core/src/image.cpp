// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#include "medrg/image.hpp"

#include <cctype>
#include <fstream>
#include <string>

#include "medrg/errors.hpp"

namespace medrg {

namespace {

// Reads the next whitespace-delimited header integer, skipping '#' comments.
int read_header_int(std::istream &in, const std::filesystem::path &path) {
    int c = in.peek();
    while (c != EOF) {
        if (std::isspace(c)) {
            in.get();
        } else if (c == '#') {
            std::string ignored;
            std::getline(in, ignored);
        } else {
            break;
        }
        c = in.peek();
    }
    int value = 0;
    if (!(in >> value)) {
        throw ParseError(path.string(), 1, "malformed netpbm header");
    }
    return value;
}

std::vector<std::uint8_t> read_netpbm(const std::filesystem::path &path, const char *magic,
                                      int channels, int &width, int &height) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(path.string(), "cannot open for reading");
    }
    char m[2] = {};
    in.read(m, 2);
    if (!in || m[0] != magic[0] || m[1] != magic[1]) {
        throw ParseError(path.string(), 1, std::string("expected ") + magic + " magic");
    }
    width = read_header_int(in, path);
    height = read_header_int(in, path);
    const int maxval = read_header_int(in, path);
    if (width <= 0 || height <= 0 || maxval != 255) {
        throw ParseError(path.string(), 1, "unsupported netpbm dimensions or maxval");
    }
    in.get(); // single whitespace byte before the raster
    std::vector<std::uint8_t> data(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
                                   static_cast<std::size_t>(channels));
    in.read(reinterpret_cast<char *>(data.data()), static_cast<std::streamsize>(data.size()));
    if (in.gcount() != static_cast<std::streamsize>(data.size())) {
        throw ParseError(path.string(), 1, "truncated raster");
    }
    return data;
}

void write_netpbm(const std::filesystem::path &path, const char *magic, int width, int height,
                  const std::vector<std::uint8_t> &data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError(path.string(), "cannot open for writing");
    }
    out << magic << '\n' << width << ' ' << height << "\n255\n";
    out.write(reinterpret_cast<const char *>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) {
        throw IoError(path.string(), "write failure");
    }
}

} // namespace

void write_pgm(const GrayImage &image, const std::filesystem::path &path) {
    write_netpbm(path, "P5", image.width, image.height, image.pixels);
}

GrayImage read_pgm(const std::filesystem::path &path) {
    GrayImage img;
    img.pixels = read_netpbm(path, "P5", 1, img.width, img.height);
    return img;
}

void write_ppm(const RgbImage &image, const std::filesystem::path &path) {
    write_netpbm(path, "P6", image.width, image.height, image.pixels);
}

RgbImage read_ppm(const std::filesystem::path &path) {
    RgbImage img;
    img.pixels = read_netpbm(path, "P6", 3, img.width, img.height);
    return img;
}

} // namespace medrg
