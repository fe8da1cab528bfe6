#pragma once

#include <cmath>

namespace extinct {

/// Neumaier compensated running sum.
class CompensatedSum {
public:
    explicit CompensatedSum(double start = 0.0) : sum_(start) {}
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) comp_ += (sum_ - t) + x;
        else comp_ += (x - t) + sum_;
        sum_ = t;
    }
    [[nodiscard]] double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace extinct
