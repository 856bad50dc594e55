#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace adanas {

// Dense row-major tensor of 64-bit reals. `grad` stays empty until a backward
// pass populates it; when present it has the same length as `data`.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;

    Tensor() = default;
    Tensor(std::vector<int> shape_in, std::vector<double> data_in);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor scalar(double value);

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    bool is_scalar() const { return numel() == 1; }

    double& at(int64_t i) { return data[static_cast<size_t>(i)]; }
    double at(int64_t i) const { return data[static_cast<size_t>(i)]; }

    void ensure_grad();  // allocates a zeroed grad buffer if absent
    void clear_grad() { grad.clear(); }
};

int64_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

bool all_finite(const std::vector<double>& v);

// Throws NumericError naming `where` if any entry is NaN/Inf.
void ensure_finite(const std::vector<double>& v, const char* where);

} // namespace adanas
