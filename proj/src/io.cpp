#include "nlsfam/io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace nlsfam {

namespace {

void byteswap_if_needed(std::vector<double>& raw) {
    if constexpr (std::endian::native == std::endian::big) {
        for (double& v : raw) {
            std::uint64_t u;
            std::memcpy(&u, &v, 8);
            u = ((u & 0x00000000000000ffULL) << 56) | ((u & 0x000000000000ff00ULL) << 40) |
                ((u & 0x0000000000ff0000ULL) << 24) | ((u & 0x00000000ff000000ULL) << 8) |
                ((u & 0x000000ff00000000ULL) >> 8) | ((u & 0x0000ff0000000000ULL) >> 24) |
                ((u & 0x00ff000000000000ULL) >> 40) | ((u & 0xff00000000000000ULL) >> 56);
            std::memcpy(&v, &u, 8);
        }
    }
}

}  // namespace

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void save_field(const std::string& path, const ComplexField& f, double t) {
    std::vector<double> raw(2 * f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        raw[2 * i] = f[i].real();
        raw[2 * i + 1] = f[i].imag();
    }
    byteswap_if_needed(raw);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw validation_error("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * sizeof(double)));
    if (!out) throw validation_error("write failed: " + path);

    nlohmann::json meta;
    meta["L"] = f.grid.length();
    meta["M"] = f.grid.points();
    meta["t"] = t;
    std::ofstream side(path + ".json");
    if (!side) throw validation_error("cannot open for writing: " + path + ".json");
    side << meta.dump(2) << "\n";
}

ComplexField load_field(const std::string& path, double* t_out) {
    std::ifstream side(path + ".json");
    if (!side) throw validation_error("missing sidecar: " + path + ".json");
    nlohmann::json meta = nlohmann::json::parse(side);
    const double L = meta.at("L").get<double>();
    const std::size_t M = meta.at("M").get<std::size_t>();
    if (t_out) *t_out = meta.at("t").get<double>();

    std::ifstream in(path, std::ios::binary);
    if (!in) throw validation_error("cannot open: " + path);
    std::vector<double> raw(2 * M);
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(raw.size() * sizeof(double)))
        throw validation_error("truncated field dump: " + path);
    byteswap_if_needed(raw);
    ComplexField f{Grid{L, M}};
    for (std::size_t i = 0; i < M; ++i) f[i] = cplx{raw[2 * i], raw[2 * i + 1]};
    return f;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw validation_error("cannot open for writing: " + path);
    for (std::size_t j = 0; j < header.size(); ++j)
        out << header[j] << (j + 1 < header.size() ? "," : "\n");
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw validation_error("csv row width does not match header");
        for (std::size_t j = 0; j < row.size(); ++j)
            out << format_g17(row[j]) << (j + 1 < row.size() ? "," : "\n");
    }
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace nlsfam
