// Times the OpenMP dense-layer kernels against the serial reference on the
// layer shapes of the default model. Usage: bench_kernels [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>

#include "atp/kernels.hpp"

namespace {

using Clock = std::chrono::steady_clock;
using atp::kernels::MatrixXd;
using atp::kernels::VectorXd;

MatrixXd random_matrix(int r, int c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

template <class Fn>
double time_ms(int repeats, Fn&& fn) {
  fn();  // warm-up
  const auto t0 = Clock::now();
  for (int i = 0; i < repeats; ++i) fn();
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count() / repeats;
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::max(1, std::atoi(argv[1])) : 20;
  const int batch = 100;
  const int shapes[][2] = {{150, 300}, {300, 200}, {200, 16}, {11, 200}, {200, 300}, {300, 150}};
  std::mt19937_64 rng(1);

  std::printf("threads: %d, batch %d, %d repeats\n", atp::kernels::max_threads(), batch, repeats);
  std::printf("%-10s %12s %12s %8s %12s %12s %8s\n", "layer", "fwd ser ms", "fwd omp ms", "speedup", "bwd ser ms",
              "bwd omp ms", "speedup");
  for (const auto& s : shapes) {
    const int in = s[0], out = s[1];
    const MatrixXd W = random_matrix(out, in, rng);
    const VectorXd b = random_matrix(out, 1, rng);
    const MatrixXd X = random_matrix(in, batch, rng);
    const MatrixXd dY = random_matrix(out, batch, rng);
    MatrixXd Y, dW, dX;
    VectorXd db;

    const double fs = time_ms(repeats, [&] { atp::kernels::serial::affine_forward(W, b, X, Y); });
    const double fp = time_ms(repeats, [&] { atp::kernels::affine_forward(W, b, X, Y); });
    const double bs = time_ms(repeats, [&] { atp::kernels::serial::affine_backward(W, X, dY, dW, db, &dX); });
    const double bp = time_ms(repeats, [&] { atp::kernels::affine_backward(W, X, dY, dW, db, &dX); });
    char name[16];
    std::snprintf(name, sizeof name, "%dx%d", in, out);
    std::printf("%-10s %12.3f %12.3f %8.2f %12.3f %12.3f %8.2f\n", name, fs, fp, fs / fp, bs, bp, bs / bp);
  }
  return 0;
}
