#include <chrono>
#include <cstdio>
#include <string>
#include <vector>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "forksim/dag.hpp"
#include "forksim/dispersal.hpp"

using namespace forksim;

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

void bench(const char* name, const Dag& d, uint32_t B) {
  auto t0 = std::chrono::steady_clock::now();
  auto ser = dispersal_sweep_serial(d, d.root_task, B);
  double ts = ms_since(t0);
  t0 = std::chrono::steady_clock::now();
  auto par = dispersal_sweep(d, d.root_task, B);
  double tp = ms_since(t0);
  bool same = ser.size() == par.size();
  for (size_t i = 0; same && i < ser.size(); i++)
    same = ser[i].r == par[i].r && ser[i].blocks == par[i].blocks;
  std::printf("%-18s B=%-2u %9zu windows  serial %8.2f ms  parallel %8.2f ms  x%.2f  %s\n", name,
              B, ser.size(), ts, tp, tp > 0 ? ts / tp : 0.0, same ? "match" : "MISMATCH");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (serial build)\n");
#endif
  Dag scan = build_scan_dag(512);
  bench("scan n=512", scan, 8);
  Dag tr16 = build_transpose_dag(16, 16);
  bench("transpose 16x16", tr16, 4);
  Dag tr32 = build_transpose_dag(32, 32);
  bench("transpose 32x32", tr32, 4);
  Dag pre = build_prefix_dag(1024, PrefixVariant::Local);
  int32_t p2 = pre.tasks[pre.root_task].children[1];
  auto t0 = std::chrono::steady_clock::now();
  auto ser = dispersal_sweep_serial(pre, p2, 8);
  double ts = ms_since(t0);
  t0 = std::chrono::steady_clock::now();
  auto par = dispersal_sweep(pre, p2, 8);
  double tp = ms_since(t0);
  std::printf("%-18s B=%-2u %9zu windows  serial %8.2f ms  parallel %8.2f ms  x%.2f  %s\n",
              "prefix-local p2", 8u, ser.size(), ts, tp, tp > 0 ? ts / tp : 0.0,
              ser.size() == par.size() ? "match" : "MISMATCH");
  return 0;
}
