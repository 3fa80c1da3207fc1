#pragma once

#include <complex>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace rgsim {

// Thin stateful wrapper so steppers can reuse one plan and scratch buffer.
class Fft {
 public:
  void forward(const std::vector<std::complex<double>>& in,
               std::vector<std::complex<double>>& out) {
    impl_.fwd(out, in);
  }
  void inverse(const std::vector<std::complex<double>>& in,
               std::vector<std::complex<double>>& out) {
    impl_.inv(out, in);
  }

 private:
  Eigen::FFT<double> impl_;
};

}  // namespace rgsim
