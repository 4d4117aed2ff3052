#include "barecam/image.hpp"

#include <fstream>

namespace barecam {

void write_ppm(const ImageU8& img, const std::string& path) {
    if (img.channels != 1 && img.channels != 3)
        throw ShapeError("PPM writer expects 1 or 3 channels");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open for writing: " + path);
    os << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<uint8_t> row(static_cast<size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                int src = img.channels == 1 ? 0 : c;
                row[static_cast<size_t>(x) * 3 + c] = img.at(src, y, x);
            }
        }
        os.write(reinterpret_cast<const char*>(row.data()),
                 static_cast<std::streamsize>(row.size()));
    }
    if (!os) throw FormatError("short write: " + path);
}

namespace {

// Skips whitespace and '#' comments, then reads one header token.
std::string next_token(std::istream& is) {
    std::string tok;
    int ch;
    while ((ch = is.get()) != EOF) {
        if (ch == '#') {
            while ((ch = is.get()) != EOF && ch != '\n') {}
            continue;
        }
        if (!std::isspace(ch)) break;
    }
    if (ch == EOF) throw FormatError("PPM header ended early");
    do {
        tok.push_back(static_cast<char>(ch));
        ch = is.get();
    } while (ch != EOF && !std::isspace(ch) && ch != '#');
    if (ch == '#') is.unget();
    return tok;
}

int parse_dim(const std::string& tok, const char* what) {
    size_t pos = 0;
    int v = 0;
    try {
        v = std::stoi(tok, &pos);
    } catch (const std::exception&) {
        throw FormatError(std::string("PPM header: bad ") + what + " '" + tok + "'");
    }
    if (pos != tok.size() || v < 1)
        throw FormatError(std::string("PPM header: bad ") + what + " '" + tok + "'");
    return v;
}

}  // namespace

ImageU8 read_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open: " + path);
    if (next_token(is) != "P6") throw FormatError("not a binary PPM (P6): " + path);
    int w = parse_dim(next_token(is), "width");
    int h = parse_dim(next_token(is), "height");
    std::string maxval = next_token(is);
    if (maxval != "255")
        throw FormatError("unsupported PPM maxval " + maxval + " (only 255): " + path);
    // Exactly one whitespace byte separates the header from the raster; the
    // token reader has already consumed it.

    ImageU8 img(3, h, w);
    std::vector<uint8_t> raster(static_cast<size_t>(w) * h * 3);
    is.read(reinterpret_cast<char*>(raster.data()),
            static_cast<std::streamsize>(raster.size()));
    if (static_cast<size_t>(is.gcount()) != raster.size())
        throw FormatError("truncated PPM raster: " + path);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = raster[(static_cast<size_t>(y) * w + x) * 3 + c];
    return img;
}

}  // namespace barecam
