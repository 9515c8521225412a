#include "roughfolio/csv_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace roughfolio {

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

void write_path_csv(const SampledPath& path, std::ostream& out) {
    out << "t";
    for (std::size_t k = 1; k <= path.dim(); ++k) out << ",x" << k;
    out << "\n";
    for (std::size_t i = 0; i < path.size(); ++i) {
        out << format_double(path.time(i));
        for (std::size_t k = 0; k < path.dim(); ++k) out << "," << format_double(path.value(i, k));
        out << "\n";
    }
}

void write_path_csv(const SampledPath& path, const std::string& filename) {
    std::ofstream out(filename);
    if (!out) throw std::runtime_error("cannot open " + filename + " for writing");
    write_path_csv(path, out);
}

SampledPath read_path_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("read_path_csv: empty input");
    std::size_t dim = 0;
    for (char c : line)
        if (c == ',') ++dim;
    if (dim == 0) throw std::runtime_error("read_path_csv: bad header");
    std::vector<double> times, values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(row, cell, ',')) {
            const double v = std::stod(cell);
            if (col == 0)
                times.push_back(v);
            else
                values.push_back(v);
            ++col;
        }
        if (col != dim + 1) throw std::runtime_error("read_path_csv: ragged row");
    }
    return SampledPath(std::move(times), std::move(values), dim);
}

SampledPath read_path_csv(const std::string& filename) {
    std::ifstream in(filename);
    if (!in) throw std::runtime_error("cannot open " + filename);
    return read_path_csv(in);
}

void write_lift_csv(const RoughPath& lift, std::ostream& out) {
    const std::size_t d = lift.dim();
    out << "t";
    for (std::size_t k = 1; k <= d; ++k) out << ",x" << k;
    for (std::size_t a = 1; a <= d; ++a)
        for (std::size_t b = 1; b <= d; ++b) out << ",I" << a << b;
    out << "\n";
    for (std::size_t i = 0; i < lift.size(); ++i) {
        out << format_double(lift.base().time(i));
        for (std::size_t k = 0; k < d; ++k) out << "," << format_double(lift.base().value(i, k));
        const auto it = lift.iterated_at(i);
        for (std::size_t k = 0; k < d * d; ++k) out << "," << format_double(it[k]);
        out << "\n";
    }
}

void write_lift_csv(const RoughPath& lift, const std::string& filename) {
    std::ofstream out(filename);
    if (!out) throw std::runtime_error("cannot open " + filename + " for writing");
    write_lift_csv(lift, out);
}

} // namespace roughfolio
