#include "flowlab/field_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace flowlab {

namespace {

constexpr char kMagic[] = "FLOW1\n";

static_assert(std::endian::native == std::endian::little,
              "FLOW1 I/O assumes a little-endian host");

} // namespace

void write_field(const std::string& path, const RealField& f, const nlohmann::json& meta) {
    if (f.data.size() != f.grid.size())
        throw std::invalid_argument("write_field: data length does not match grid");

    nlohmann::json header;
    header["n"] = f.grid.n;
    header["length"] = f.grid.length;
    header["dtype"] = "f64";
    header["meta"] = meta;

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_field: cannot open " + path);
    out.write(kMagic, 6);
    const std::string line = header.dump();
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.put('\n');
    out.write(reinterpret_cast<const char*>(f.data.data()),
              static_cast<std::streamsize>(f.data.size() * sizeof(double)));
    if (!out) throw std::runtime_error("write_field: short write to " + path);
}

LoadedField read_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_field: cannot open " + path);

    char magic[6];
    in.read(magic, 6);
    if (!in || std::memcmp(magic, kMagic, 6) != 0)
        throw std::runtime_error("read_field: bad magic in " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("read_field: missing header in " + path);

    nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded()) throw std::runtime_error("read_field: malformed header in " + path);
    if (!header.contains("n") || !header.contains("length"))
        throw std::runtime_error("read_field: header missing shape in " + path);
    if (header.value("dtype", "f64") != std::string("f64"))
        throw std::runtime_error("read_field: unsupported dtype in " + path);

    LoadedField lf;
    lf.field = RealField(Grid2D(header["n"].get<int>(), header["length"].get<double>()));
    lf.meta = header.value("meta", nlohmann::json::object());

    in.read(reinterpret_cast<char*>(lf.field.data.data()),
            static_cast<std::streamsize>(lf.field.data.size() * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(lf.field.data.size() * sizeof(double)))
        throw std::runtime_error("read_field: truncated payload in " + path);
    return lf;
}

} // namespace flowlab
