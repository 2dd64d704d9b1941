// Throughput benchmark for the batched kernels: times the serial reference
// (thread budget 1) against the OpenMP path (runtime default) on the hot
// operations and reports rows/s plus the speedup. On a single-core host the
// two paths coincide; the benchmark then documents baseline throughput.
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "febm/energy.hpp"
#include "febm/flow.hpp"
#include "febm/parallel.hpp"
#include "febm/rng.hpp"
#include "febm/samplers.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double time_once(const std::function<void()>& fn) {
  const auto t0 = Clock::now();
  fn();
  const auto t1 = Clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

// Repeats until ~0.5 s elapsed; returns seconds per call.
double time_call(const std::function<void()>& fn) {
  fn();  // warm-up
  double total = 0.0;
  int calls = 0;
  while (total < 0.5) {
    total += time_once(fn);
    ++calls;
  }
  return total / calls;
}

void report(const char* name, std::size_t rows, double serial_s,
            double parallel_s) {
  std::printf("%-28s serial %8.2f krows/s   parallel %8.2f krows/s   x%.2f\n",
              name, rows / serial_s / 1e3, rows / parallel_s / 1e3,
              serial_s / parallel_s);
}

void bench_case(const char* name, std::size_t rows,
                const std::function<void()>& fn) {
  double serial_s, parallel_s;
  {
    febm::ThreadGuard guard(1);
    serial_s = time_call(fn);
  }
  {
    febm::ThreadGuard guard(0);
    parallel_s = time_call(fn);
  }
  report(name, rows, serial_s, parallel_s);
}

}  // namespace

int main() {
  std::printf("thread budget: %d requested, OpenMP %s\n", febm::num_threads(),
#if defined(_OPENMP)
              "enabled"
#else
              "disabled"
#endif
  );

  const std::size_t rows = 256;
  febm::Rng rng(7);

  febm::FlowConfig fc;
  fc.dim = 2;
  fc.depth = 4;
  fc.hidden_width = 128;
  febm::FlowModel flow(fc);
  flow.init_weights(rng);
  const febm::Tensor z0 = febm::std_normal_batch(rows, fc.dim, rng);
  flow.init_actnorm(flow.forward(z0));

  febm::EnergyConfig ec;
  ec.dim = 2;
  febm::EnergyModel energy(ec);
  energy.init_weights(rng);
  const febm::TiltedModel model(flow, energy);
  const febm::LatentTiltedDensity latent(model);
  const febm::DataTiltedDensity data_space(model);

  const febm::Tensor Z = febm::std_normal_batch(rows, fc.dim, rng);

  bench_case("flow forward", rows, [&] { (void)flow.forward(Z); });
  bench_case("flow log-prob", rows, [&] { (void)flow.log_prob(Z); });
  bench_case("latent logp+grad", rows, [&] {
    febm::Tensor lp, g;
    latent.logp_grad(Z, &lp, &g);
  });
  bench_case("data logp+grad", rows, [&] {
    febm::Tensor lp, g;
    data_space.logp_grad(Z, &lp, &g);
  });

  auto chains = febm::init_chains(64, fc.dim, 11, 0.15);
  febm::HmcConfig hmc;
  bench_case("hmc sweep (64 chains)", 64,
             [&] { febm::hmc_sweep(chains, latent, hmc, 1); });
  return 0;
}
