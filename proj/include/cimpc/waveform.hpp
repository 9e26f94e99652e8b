#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace cimpc {

/// Uniformly sampled multi-channel time series. Sample i is at t0 + i * dt.
class Waveform {
public:
    Waveform() = default;
    Waveform(double t0, double dt, std::vector<std::string> names);

    double t0() const { return t0_; }
    double dt() const { return dt_; }
    double time(std::size_t i) const { return t0_ + static_cast<double>(i) * dt_; }
    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }

    const std::vector<std::string>& names() const { return names_; }
    bool has(const std::string& name) const;
    std::size_t index_of(const std::string& name) const;

    std::span<const double> channel(const std::string& name) const;
    std::span<const double> channel(std::size_t index) const;

    /// Appends one sample; values must match names() in order and length.
    void append(std::span<const double> values);
    void reserve(std::size_t n);

    /// Sample range [first, last) whose times fall in [t_begin, t_end).
    std::pair<std::size_t, std::size_t> window(double t_begin, double t_end) const;

private:
    double t0_ = 0.0;
    double dt_ = 0.0;
    std::size_t size_ = 0;
    std::vector<std::string> names_;
    std::vector<std::vector<double>> data_;
};

/// Writes "t,<channel>..." rows at full double precision, keeping every
/// decimation-th sample plus the last one.
void write_csv(std::ostream& os, const Waveform& w, std::size_t decimation = 1);
void emit_csv(const Waveform& w, const std::string& path, std::size_t decimation = 1);

/// Reads a CSV written by write_csv. Time column is dropped; spacing is taken
/// from the first two rows.
Waveform read_csv(std::istream& is);
Waveform read_csv(const std::string& path);

}  // namespace cimpc
