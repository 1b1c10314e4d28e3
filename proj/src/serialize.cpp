#include "tpad/serialize.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "tpad/error.hpp"
#include "tpad/params.hpp"

namespace tpad::io {

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }
void write_i64(std::ostream& os, int64_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }
void write_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }

void write_string(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_f64_array(std::ostream& os, const std::vector<double>& v) {
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

uint32_t read_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    check_data(static_cast<bool>(is), "truncated container (u32)");
    return v;
}

int64_t read_i64(std::istream& is) {
    int64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    check_data(static_cast<bool>(is), "truncated container (i64)");
    return v;
}

double read_f64(std::istream& is) {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    check_data(static_cast<bool>(is), "truncated container (f64)");
    return v;
}

std::string read_string(std::istream& is) {
    uint32_t len = read_u32(is);
    std::string s(len, '\0');
    is.read(s.data(), len);
    check_data(static_cast<bool>(is), "truncated container (string)");
    return s;
}

std::vector<double> read_f64_array(std::istream& is, size_t count) {
    std::vector<double> v(count);
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(double)));
    check_data(static_cast<bool>(is), "truncated container (f64 array)");
    return v;
}

void write_mat(std::ostream& os, const Mat& m) {
    write_i64(os, m.r);
    write_i64(os, m.c);
    write_f64_array(os, m.d);
}

Mat read_mat(std::istream& is) {
    Mat m;
    m.r = read_i64(is);
    m.c = read_i64(is);
    check_data(m.r >= 0 && m.c >= 0 && m.r * m.c < (int64_t{1} << 32), "corrupt matrix header");
    m.d = read_f64_array(is, static_cast<size_t>(m.r * m.c));
    return m;
}

void write_magic(std::ostream& os, const char magic[8]) { os.write(magic, 8); }

bool check_magic(std::istream& is, const char magic[8]) {
    char buf[8] = {};
    is.read(buf, 8);
    return is && std::memcmp(buf, magic, 8) == 0;
}

std::string file_checksum(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    check_data(static_cast<bool>(f), "cannot open file for checksum: " + p.string());
    uint64_t h = 1469598103934665603ull;
    char buf[4096];
    while (f) {
        f.read(buf, sizeof buf);
        std::streamsize n = f.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

void atomic_write(const std::filesystem::path& p, const std::string& bytes) {
    auto tmp = p;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        check_data(static_cast<bool>(f), "cannot write file: " + tmp.string());
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        check_data(static_cast<bool>(f), "write failure: " + tmp.string());
    }
    std::filesystem::rename(tmp, p);
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    check_data(static_cast<bool>(f), "cannot open file: " + p.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace tpad::io

namespace tpad {

void ParamStore::save(std::ostream& os) const {
    io::write_u32(os, static_cast<uint32_t>(items_.size()));
    for (const auto& [name, v] : items_) {
        io::write_string(os, name);
        io::write_mat(os, v.val());
    }
}

void ParamStore::load(std::istream& is) {
    uint32_t count = io::read_u32(is);
    check_data(count == items_.size(), "parameter blob count mismatch");
    for (uint32_t i = 0; i < count; ++i) {
        std::string name = io::read_string(is);
        Mat m = io::read_mat(is);
        check_data(name == items_[i].first, "parameter name mismatch: expected " + items_[i].first + " got " + name);
        check_data(m.same_shape(items_[i].second.val()), "parameter shape mismatch for " + name);
        items_[i].second.node->val = std::move(m);
    }
}

} // namespace tpad
