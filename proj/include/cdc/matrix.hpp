#ifndef CDC_MATRIX_HPP
#define CDC_MATRIX_HPP

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cdc/common.hpp"

namespace cdc {

// Row-major (n x d) matrix of 64-bit floats. All entries finite;
// immutable by convention once loaded or generated.
struct FeatureMatrix {
    std::vector<double> data;
    std::size_t n = 0;
    std::size_t d = 0;

    FeatureMatrix() = default;
    FeatureMatrix(std::size_t n_, std::size_t d_)
        : data(n_ * d_, 0.0), n(n_), d(d_) {}

    const double* row(std::size_t i) const { return data.data() + i * d; }
    double* row(std::size_t i) { return data.data() + i * d; }

    void validate(const std::string& origin = "matrix") const {
        if (n < 1 || d < 1)
            throw InvalidArgument(origin + ": need n >= 1 and d >= 1, got n=" +
                                  std::to_string(n) + " d=" + std::to_string(d));
        if (data.size() != n * d)
            throw InvalidArgument(origin + ": storage size does not match n*d");
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j)
                if (!std::isfinite(data[i * d + j]))
                    throw InvalidArgument(origin + ": non-finite entry at row " +
                                          std::to_string(i) + ", col " +
                                          std::to_string(j));
    }
};

enum class FileFormat { npy, csv };

// Summation runs in 8-wide blocks so every code path (including the
// early-exit query kernel) rounds identically.
inline double squared_distance(const double* a, const double* b, std::size_t d) {
    double acc = 0.0;
    std::size_t t = 0;
    for (; t + 8 <= d; t += 8) {
        double s0 = a[t] - b[t], s1 = a[t + 1] - b[t + 1];
        double s2 = a[t + 2] - b[t + 2], s3 = a[t + 3] - b[t + 3];
        double s4 = a[t + 4] - b[t + 4], s5 = a[t + 5] - b[t + 5];
        double s6 = a[t + 6] - b[t + 6], s7 = a[t + 7] - b[t + 7];
        acc += s0 * s0 + s1 * s1 + s2 * s2 + s3 * s3 + s4 * s4 + s5 * s5 +
               s6 * s6 + s7 * s7;
    }
    for (; t < d; ++t) {
        double diff = a[t] - b[t];
        acc += diff * diff;
    }
    return acc;
}

inline double distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw InvalidArgument("distance: dimension mismatch (" +
                              std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()) + ")");
    return std::sqrt(squared_distance(a.data(), b.data(), a.size()));
}

namespace detail {

inline std::string npy_header_value(const std::string& header, const std::string& key) {
    auto pos = header.find("'" + key + "'");
    if (pos == std::string::npos)
        throw IoError("npy: header missing key '" + key + "'");
    pos = header.find(':', pos);
    if (pos == std::string::npos) throw IoError("npy: malformed header");
    ++pos;
    while (pos < header.size() && header[pos] == ' ') ++pos;
    std::size_t end = pos;
    int depth = 0;
    while (end < header.size()) {
        char c = header[end];
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (depth == 0 && (c == ',' || c == '}')) break;
        ++end;
    }
    return header.substr(pos, end - pos);
}

}  // namespace detail

// NPY format version 1.0 only: little-endian f4/f8, C order, 2-D shape.
inline FeatureMatrix load_npy(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "\x93NUMPY", 6) != 0)
        throw IoError("npy: bad magic in " + path);
    if (magic[6] != 1 || magic[7] != 0)
        throw IoError("npy: unsupported version " + std::to_string(int(magic[6])) +
                      "." + std::to_string(int(magic[7])) + " (only 1.0)");
    unsigned char lenbuf[2];
    in.read(reinterpret_cast<char*>(lenbuf), 2);
    if (!in) throw IoError("npy: truncated header length");
    std::size_t header_len = lenbuf[0] | (std::size_t(lenbuf[1]) << 8);
    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw IoError("npy: truncated header");

    std::string descr = detail::npy_header_value(header, "descr");
    std::string order = detail::npy_header_value(header, "fortran_order");
    std::string shape = detail::npy_header_value(header, "shape");

    if (order.find("True") != std::string::npos)
        throw IoError("npy: unsupported layout (fortran_order=True) in " + path);

    bool is_f4;
    if (descr.find("<f4") != std::string::npos) is_f4 = true;
    else if (descr.find("<f8") != std::string::npos) is_f4 = false;
    else throw IoError("npy: unsupported element type " + descr +
                       " (expected '<f4' or '<f8')");

    // shape like "(3, 4)" — must be 2-D
    std::vector<std::size_t> dims;
    {
        std::string digits;
        for (char c : shape) {
            if (c >= '0' && c <= '9') digits.push_back(c);
            else if (!digits.empty()) {
                dims.push_back(std::stoull(digits));
                digits.clear();
            }
        }
        if (!digits.empty()) dims.push_back(std::stoull(digits));
    }
    if (dims.size() != 2)
        throw IoError("npy: expected a 2-D array, got " +
                      std::to_string(dims.size()) + "-D in " + path);

    FeatureMatrix m(dims[0], dims[1]);
    std::size_t count = dims[0] * dims[1];
    if (is_f4) {
        std::vector<float> buf(count);
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(count * sizeof(float)));
        if (!in) throw IoError("npy: truncated payload in " + path);
        for (std::size_t i = 0; i < count; ++i) m.data[i] = double(buf[i]);
    } else {
        in.read(reinterpret_cast<char*>(m.data.data()),
                static_cast<std::streamsize>(count * sizeof(double)));
        if (!in) throw IoError("npy: truncated payload in " + path);
    }
    m.validate(path);
    return m;
}

inline void save_npy(const std::string& path, const FeatureMatrix& m) {
    std::ostringstream hs;
    hs << "{'descr': '<f8', 'fortran_order': False, 'shape': (" << m.n << ", "
       << m.d << "), }";
    std::string header = hs.str();
    std::size_t unpadded = 8 + 2 + header.size() + 1;
    std::size_t pad = (64 - unpadded % 64) % 64;
    header.append(pad, ' ');
    header.push_back('\n');

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path);
    out.write("\x93NUMPY\x01\x00", 8);
    unsigned char lenbuf[2] = {static_cast<unsigned char>(header.size() & 0xff),
                               static_cast<unsigned char>(header.size() >> 8)};
    out.write(reinterpret_cast<char*>(lenbuf), 2);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(m.data.data()),
              static_cast<std::streamsize>(m.data.size() * sizeof(double)));
    if (!out) throw IoError("write failed: " + path);
}

// Headerless comma-separated floats, one sample per line.
inline FeatureMatrix load_csv(const std::string& path, bool skip_header = false) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path);
    FeatureMatrix m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (skip_header && lineno == 1) continue;
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            std::size_t comma = line.find(',', pos);
            std::string field = line.substr(
                pos, comma == std::string::npos ? std::string::npos : comma - pos);
            try {
                std::size_t used = 0;
                double v = std::stod(field, &used);
                // trailing garbage after the number is a parse error
                while (used < field.size() &&
                       (field[used] == ' ' || field[used] == '\r'))
                    ++used;
                if (used != field.size()) throw std::invalid_argument(field);
                row.push_back(v);
            } catch (const std::exception&) {
                throw IoError("csv: cannot parse '" + field + "' at line " +
                              std::to_string(lineno) + " in " + path);
            }
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (m.d == 0) {
            m.d = row.size();
        } else if (row.size() != m.d) {
            throw IoError("csv: line " + std::to_string(lineno) + " has " +
                          std::to_string(row.size()) + " fields, expected " +
                          std::to_string(m.d) + " in " + path);
        }
        m.data.insert(m.data.end(), row.begin(), row.end());
        ++m.n;
    }
    m.validate(path);
    return m;
}

inline FeatureMatrix load_matrix(const std::string& path, FileFormat format,
                                 bool csv_skip_header = false) {
    return format == FileFormat::npy ? load_npy(path)
                                     : load_csv(path, csv_skip_header);
}

}  // namespace cdc

#endif  // CDC_MATRIX_HPP
