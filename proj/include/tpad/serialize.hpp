#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "tpad/mat.hpp"

namespace tpad::io {

// Little-endian primitives for the binary containers.
void write_u32(std::ostream& os, uint32_t v);
void write_i64(std::ostream& os, int64_t v);
void write_f64(std::ostream& os, double v);
void write_string(std::ostream& os, const std::string& s);
void write_f64_array(std::ostream& os, const std::vector<double>& v);

uint32_t read_u32(std::istream& is);
int64_t read_i64(std::istream& is);
double read_f64(std::istream& is);
std::string read_string(std::istream& is);
std::vector<double> read_f64_array(std::istream& is, size_t count);

void write_mat(std::ostream& os, const Mat& m);
Mat read_mat(std::istream& is);

// Fixed 8-byte magic at the start of every container.
void write_magic(std::ostream& os, const char magic[8]);
bool check_magic(std::istream& is, const char magic[8]);

// FNV-1a 64 over a file's bytes, hex string. Used by manifests.
std::string file_checksum(const std::filesystem::path& p);

// Write-to-temp-then-rename so readers never observe partial files.
void atomic_write(const std::filesystem::path& p, const std::string& bytes);
std::string read_file(const std::filesystem::path& p);

} // namespace tpad::io
