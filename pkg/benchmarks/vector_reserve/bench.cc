// Missing-reserve microbenchmark.
//
// Fills a vector of fixed-size rows from scratch `reps` times and prints
// nanoseconds per push_back, one line per run, as the bench protocol
// expects. Without the reserve the vector reallocates log2(n) times per
// rep and copies every row again; fix.diff adds the single reserve call.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <vector>

namespace {

struct Row {
  char payload[64];
};

double run_once(int reps, int n) {
  using clock = std::chrono::steady_clock;
  long survive = 0;
  const auto start = clock::now();
  for (int r = 0; r < reps; ++r) {
    std::vector<Row> rows;
    for (int i = 0; i < n; ++i) {
      Row row;
      row.payload[0] = static_cast<char>(i + r);
      rows.push_back(row);
    }
    survive += rows.back().payload[0];
  }
  const auto stop = clock::now();
  if (survive == 424242424242L) {
    std::fprintf(stderr, "unreachable checksum\n");
  }
  const double ns = std::chrono::duration<double, std::nano>(stop - start).count();
  return ns / (static_cast<double>(reps) * n);
}

}  // namespace

int main(int argc, char** argv) {
  const int runs = argc > 1 ? std::atoi(argv[1]) : 10;
  const int reps = 24;
  const int n = 1 << 14;
  run_once(4, n);  // warm the allocator and caches
  for (int i = 0; i < runs; ++i) {
    std::printf("%.4f\n", run_once(reps, n));
  }
  return 0;
}
