#include "mfreg/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "mfreg/multilevel.hpp"

namespace mfreg::io {

namespace {

template <typename T>
T from_little(const unsigned char* p) {
    std::array<unsigned char, sizeof(T)> buf;
    std::memcpy(buf.data(), p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(buf.begin(), buf.end());
    }
    T v;
    std::memcpy(&v, buf.data(), sizeof(T));
    return v;
}

template <typename T>
void to_little(T v, unsigned char* p) {
    std::array<unsigned char, sizeof(T)> buf;
    std::memcpy(buf.data(), &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(buf.begin(), buf.end());
    }
    std::memcpy(p, buf.data(), sizeof(T));
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

struct Header {
    std::map<std::string, std::string> keys;
    std::size_t payload_offset = 0; // only for ElementDataFile = LOCAL
};

Header parse_header(const std::vector<unsigned char>& bytes) {
    Header h;
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        std::size_t eol = pos;
        while (eol < bytes.size() && bytes[eol] != '\n') {
            ++eol;
        }
        std::string line(reinterpret_cast<const char*>(bytes.data() + pos), eol - pos);
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        pos = eol < bytes.size() ? eol + 1 : eol;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("malformed header line: " + line);
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        h.keys[key] = val;
        if (key == "ElementDataFile") {
            h.payload_offset = pos;
            return h;
        }
    }
    throw std::runtime_error("header missing ElementDataFile");
}

std::string require(const Header& h, const std::string& key) {
    const auto it = h.keys.find(key);
    if (it == h.keys.end()) {
        throw std::runtime_error("header missing required key " + key);
    }
    return it->second;
}

template <typename T>
std::vector<T> parse_triplet(const std::string& s, const std::string& key) {
    std::istringstream iss(s);
    std::vector<T> out;
    T v;
    while (iss >> v) {
        out.push_back(v);
    }
    if (out.size() != 3) {
        throw std::runtime_error(key + " must have exactly 3 entries");
    }
    return out;
}

} // namespace

Volume read_volume(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    const Header h = parse_header(bytes);

    if (require(h, "NDims") != "3") {
        throw std::runtime_error("unsupported NDims (only 3 supported)");
    }
    const auto dims = parse_triplet<index_t>(require(h, "DimSize"), "DimSize");
    const auto spacing = parse_triplet<double>(require(h, "ElementSpacing"), "ElementSpacing");
    const std::string type = require(h, "ElementType");
    const std::string datafile = require(h, "ElementDataFile");

    std::size_t elem_size = 0;
    if (type == "MET_SHORT" || type == "MET_USHORT") {
        elem_size = 2;
    } else if (type == "MET_FLOAT") {
        elem_size = 4;
    } else if (type == "MET_DOUBLE") {
        elem_size = 8;
    } else {
        throw std::runtime_error("unknown ElementType " + type);
    }

    std::vector<unsigned char> payload;
    if (datafile == "LOCAL") {
        payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(h.payload_offset), bytes.end());
    } else {
        payload = read_bytes(path.parent_path() / datafile);
    }

    const index_t n = dims[0] * dims[1] * dims[2];
    if (payload.size() != static_cast<std::size_t>(n) * elem_size) {
        throw std::runtime_error("payload size does not match DimSize");
    }

    Volume v;
    v.grid = make_image_grid({dims[0], dims[1], dims[2]}, {spacing[0], spacing[1], spacing[2]});
    v.data.resize(static_cast<std::size_t>(n));
    const unsigned char* p = payload.data();
    for (index_t i = 0; i < n; ++i, p += elem_size) {
        double x;
        if (type == "MET_SHORT") {
            x = static_cast<double>(from_little<std::int16_t>(p));
        } else if (type == "MET_USHORT") {
            x = static_cast<double>(from_little<std::uint16_t>(p));
        } else if (type == "MET_FLOAT") {
            x = static_cast<double>(from_little<float>(p));
        } else {
            x = from_little<double>(p);
        }
        v.data[static_cast<std::size_t>(i)] = x;
    }
    return v;
}

void write_volume(const std::filesystem::path& path, const Volume& v) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    f << "ObjectType = Image\n";
    f << "NDims = 3\n";
    f << "DimSize = " << v.grid.m[0] << ' ' << v.grid.m[1] << ' ' << v.grid.m[2] << '\n';
    std::ostringstream sp;
    sp.precision(17);
    sp << v.grid.h[0] << ' ' << v.grid.h[1] << ' ' << v.grid.h[2];
    f << "ElementSpacing = " << sp.str() << '\n';
    f << "ElementType = MET_DOUBLE\n";
    f << "ElementDataFile = LOCAL\n";
    std::vector<unsigned char> buf(v.data.size() * sizeof(double));
    for (std::size_t i = 0; i < v.data.size(); ++i) {
        to_little(v.data[i], buf.data() + i * sizeof(double));
    }
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) {
        throw std::runtime_error("write failed: " + path.string());
    }
}

namespace {

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    auto p = path;
    p += ".meta";
    return p;
}

} // namespace

void write_deformation(const std::filesystem::path& path, std::span<const double> y,
                       const GridDesc& grid) {
    if (y.size() != static_cast<std::size_t>(3 * grid.count())) {
        throw std::invalid_argument("write_deformation: field length mismatch");
    }
    {
        std::ofstream f(path, std::ios::binary);
        if (!f) {
            throw std::runtime_error("cannot open " + path.string() + " for writing");
        }
        std::vector<unsigned char> buf(y.size() * sizeof(double));
        for (std::size_t i = 0; i < y.size(); ++i) {
            to_little(y[i], buf.data() + i * sizeof(double));
        }
        f.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size()));
        if (!f) {
            throw std::runtime_error("write failed: " + path.string());
        }
    }
    std::ofstream s(sidecar_path(path));
    if (!s) {
        throw std::runtime_error("cannot open sidecar for writing");
    }
    s.precision(17);
    s << "points=" << grid.m[0] << ' ' << grid.m[1] << ' ' << grid.m[2] << '\n';
    s << "spacing=" << grid.h[0] << ' ' << grid.h[1] << ' ' << grid.h[2] << '\n';
    s << "extent=" << grid.extent(0) << ' ' << grid.extent(1) << ' ' << grid.extent(2) << '\n';
    s << "order=component-major\n";
}

GridDesc read_deformation_grid(const std::filesystem::path& path) {
    std::ifstream s(sidecar_path(path));
    if (!s) {
        throw std::runtime_error("cannot open sidecar " + sidecar_path(path).string());
    }
    std::map<std::string, std::string> keys;
    std::string line;
    while (std::getline(s, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            continue;
        }
        keys[line.substr(0, eq)] = line.substr(eq + 1);
    }
    if (!keys.count("points") || !keys.count("spacing")) {
        throw std::runtime_error("sidecar missing points/spacing");
    }
    const auto m = parse_triplet<index_t>(keys["points"], "points");
    const auto h = parse_triplet<double>(keys["spacing"], "spacing");
    GridDesc g{{m[0], m[1], m[2]}, {h[0], h[1], h[2]}, GridKind::Nodal};
    g.validate();
    return g;
}

std::vector<double> read_deformation(const std::filesystem::path& path, const GridDesc& grid) {
    const GridDesc stored = read_deformation_grid(path);
    for (int a = 0; a < 3; ++a) {
        if (stored.m[static_cast<std::size_t>(a)] != grid.m[static_cast<std::size_t>(a)] ||
            std::abs(stored.h[static_cast<std::size_t>(a)] - grid.h[static_cast<std::size_t>(a)]) >
                1e-12 * grid.h[static_cast<std::size_t>(a)]) {
            throw std::runtime_error("deformation sidecar grid does not match expected grid");
        }
    }
    const auto bytes = read_bytes(path);
    const std::size_t n = static_cast<std::size_t>(3 * grid.count());
    if (bytes.size() != n * sizeof(double)) {
        throw std::runtime_error("deformation payload size mismatch");
    }
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = from_little<double>(bytes.data() + i * sizeof(double));
    }
    return y;
}

std::vector<std::array<double, 3>> read_landmarks(const std::filesystem::path& path,
                                                  const std::array<double, 3>& spacing) {
    std::ifstream f(path);
    if (!f) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::vector<std::array<double, 3>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        std::istringstream iss(line);
        double a, b, c;
        if (!(iss >> a >> b >> c)) {
            throw std::runtime_error("malformed landmark line " + std::to_string(lineno));
        }
        std::string extra;
        if (iss >> extra) {
            throw std::runtime_error("malformed landmark line " + std::to_string(lineno));
        }
        // Voxel indices to physical cell centers.
        out.push_back({(a + 0.5) * spacing[0], (b + 0.5) * spacing[1], (c + 0.5) * spacing[2]});
    }
    return out;
}

LandmarkStats landmark_error(const std::vector<std::array<double, 3>>& fixed,
                             const std::vector<std::array<double, 3>>& moving,
                             std::span<const double> y, const GridDesc& grid) {
    if (fixed.size() != moving.size()) {
        throw std::invalid_argument("landmark_error: list sizes differ");
    }
    const index_t n = grid.count();
    if (y.size() != static_cast<std::size_t>(3 * n)) {
        throw std::invalid_argument("landmark_error: field length mismatch");
    }
    LandmarkStats st;
    st.count = fixed.size();
    if (fixed.empty()) {
        return st;
    }
    std::vector<double> errs;
    errs.reserve(fixed.size());
    for (std::size_t i = 0; i < fixed.size(); ++i) {
        std::array<double, 3> phi{};
        for (int d = 0; d < 3; ++d) {
            const auto comp = y.subspan(static_cast<std::size_t>(d * n),
                                        static_cast<std::size_t>(n));
            phi[static_cast<std::size_t>(d)] = nodal_interpolate(comp, grid, fixed[i]);
        }
        double e2 = 0.0;
        for (int d = 0; d < 3; ++d) {
            const double diff = phi[static_cast<std::size_t>(d)] -
                                moving[i][static_cast<std::size_t>(d)];
            e2 += diff * diff;
        }
        errs.push_back(std::sqrt(e2));
    }
    double sum = 0.0;
    for (double e : errs) {
        sum += e;
    }
    st.mean = sum / static_cast<double>(errs.size());
    double var = 0.0;
    for (double e : errs) {
        var += (e - st.mean) * (e - st.mean);
    }
    st.stddev = std::sqrt(var / static_cast<double>(errs.size()));
    return st;
}

} // namespace mfreg::io
