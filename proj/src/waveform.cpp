#include "cimpc/waveform.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace cimpc {

Waveform::Waveform(double t0, double dt, std::vector<std::string> names)
    : t0_(t0), dt_(dt), names_(std::move(names)), data_(names_.size()) {}

bool Waveform::has(const std::string& name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t Waveform::index_of(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw std::out_of_range("waveform has no channel '" + name + "'");
    return static_cast<std::size_t>(it - names_.begin());
}

std::span<const double> Waveform::channel(const std::string& name) const {
    return channel(index_of(name));
}

std::span<const double> Waveform::channel(std::size_t index) const {
    return {data_.at(index).data(), size_};
}

void Waveform::append(std::span<const double> values) {
    if (values.size() != names_.size()) {
        throw std::invalid_argument("waveform append: channel count mismatch");
    }
    for (std::size_t i = 0; i < values.size(); ++i) data_[i].push_back(values[i]);
    ++size_;
}

void Waveform::reserve(std::size_t n) {
    for (auto& d : data_) d.reserve(n);
}

std::pair<std::size_t, std::size_t> Waveform::window(double t_begin, double t_end) const {
    if (size_ == 0 || dt_ <= 0.0) return {0, 0};
    auto clamp_index = [&](double t) {
        const double k = std::ceil((t - t0_) / dt_ - 1e-9);
        if (k <= 0.0) return std::size_t{0};
        return std::min(size_, static_cast<std::size_t>(k));
    };
    const std::size_t first = clamp_index(t_begin);
    const std::size_t last = clamp_index(t_end);
    return {first, std::max(first, last)};
}

void write_csv(std::ostream& os, const Waveform& w, std::size_t decimation) {
    if (decimation == 0) throw std::invalid_argument("decimation must be >= 1");
    os << 't';
    for (const auto& n : w.names()) os << ',' << n;
    os << '\n';
    os << std::setprecision(17);
    const auto write_row = [&](std::size_t i) {
        os << w.time(i);
        for (std::size_t c = 0; c < w.names().size(); ++c) os << ',' << w.channel(c)[i];
        os << '\n';
    };
    const std::size_t n = w.size();
    for (std::size_t i = 0; i < n; i += decimation) write_row(i);
    if (n > 0 && (n - 1) % decimation != 0) write_row(n - 1);
}

void emit_csv(const Waveform& w, const std::string& path, std::size_t decimation) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + ": " + std::strerror(errno));
    write_csv(out, w, decimation);
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + path + ": " + std::strerror(errno));
}

Waveform read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty CSV");
    std::vector<std::string> names;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) names.push_back(cell);
    }
    if (names.empty() || names.front() != "t") throw std::runtime_error("CSV must start with t");
    names.erase(names.begin());

    std::vector<double> times;
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != names.size() + 1) throw std::runtime_error("ragged CSV row");
        times.push_back(row.front());
        row.erase(row.begin());
        rows.push_back(std::move(row));
    }
    const double t0 = times.empty() ? 0.0 : times.front();
    const double dt = times.size() > 1 ? times[1] - times[0] : 0.0;
    Waveform w(t0, dt, names);
    w.reserve(rows.size());
    for (const auto& r : rows) w.append(r);
    return w;
}

Waveform read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path + ": " + std::strerror(errno));
    return read_csv(in);
}

}  // namespace cimpc
