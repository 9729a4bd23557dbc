#pragma once

#include <Eigen/Dense>
#include <unistd.h>

#include <cstdlib>
#include <iostream>

namespace fractallab {

/// BLAS-backed product against Eigen's own coefficient-wise product.
inline bool blas_selftest(int n = 320) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Random(n, n), b = Eigen::MatrixXd::Random(n, n);
  Eigen::MatrixXd fast = a * b;
  Eigen::MatrixXd ref = a.lazyProduct(b);
  return (fast - ref).norm() <= 1e-10 * ref.norm();
}

/// Some OpenBLAS builds pick an AVX-512 kernel that returns wrong products on certain
/// virtualized CPUs. The kernel is chosen when the library loads, so the only remedy is to
/// restart the process with OPENBLAS_CORETYPE set. Call first thing in main().
inline void ensure_reliable_blas(char** argv) {
  if (blas_selftest()) return;
  if (std::getenv("FRACTALLAB_BLAS_RESTARTED")) {
    std::cerr << "fatal: BLAS self-test fails even with OPENBLAS_CORETYPE="
              << (std::getenv("OPENBLAS_CORETYPE") ? std::getenv("OPENBLAS_CORETYPE") : "") << "\n";
    std::exit(2);
  }
  setenv("OPENBLAS_CORETYPE", "Haswell", 1);
  setenv("FRACTALLAB_BLAS_RESTARTED", "1", 1);
  execv("/proc/self/exe", argv);
  std::cerr << "fatal: could not restart with a safe BLAS kernel\n";
  std::exit(2);
}

}  // namespace fractallab
