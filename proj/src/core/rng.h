#pragma once

#include <cstdint>
#include <random>

#include "core/types.h"

namespace efc {

// All randomness in the library flows through one of these, seeded explicitly.
// Distributions are constructed fresh per draw sequence so results depend only
// on the seed and the draw order, not on leftover distribution state.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform(double lo, double hi) {
        std::uniform_real_distribution<double> d(lo, hi);
        return d(gen_);
    }

    double normal(double mean, double stddev) {
        std::normal_distribution<double> d(mean, stddev);
        return d(gen_);
    }

    Vec uniform_vec(int n, double lo, double hi) {
        std::uniform_real_distribution<double> d(lo, hi);
        Vec v(n);
        for (int i = 0; i < n; ++i) v[i] = d(gen_);
        return v;
    }

    Vec normal_vec(int n, double mean, double stddev) {
        std::normal_distribution<double> d(mean, stddev);
        Vec v(n);
        for (int i = 0; i < n; ++i) v[i] = d(gen_);
        return v;
    }

    // Row-major fill: row 0 left to right, then row 1, and so on.
    Mat normal_mat(int rows, int cols, double mean, double stddev) {
        std::normal_distribution<double> d(mean, stddev);
        Mat a(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) a(i, j) = d(gen_);
        return a;
    }

    Mat uniform_mat(int rows, int cols, double lo, double hi) {
        std::uniform_real_distribution<double> d(lo, hi);
        Mat a(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) a(i, j) = d(gen_);
        return a;
    }

    std::mt19937_64& raw() { return gen_; }

  private:
    std::mt19937_64 gen_;
};

}  // namespace efc
