// Writes a synthetic texture dataset: make_synthetic <dir> [classes] [train] [test] [size] [seed]
#include <cstdlib>
#include <iostream>
#include <numeric>

#include "synthetic.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_synthetic <dir> [classes=5] [train=60] [test=40] [size=96] [seed=1]\n";
    return 2;
  }
  auto arg = [&](int i, long fallback) { return argc > i ? std::atol(argv[i]) : fallback; };
  scripta::testing::DatasetSpec spec;
  spec.patterns.resize(static_cast<std::size_t>(arg(2, 5)));
  std::iota(spec.patterns.begin(), spec.patterns.end(), std::size_t{0});
  spec.train_per_class = static_cast<int>(arg(3, 60));
  spec.test_per_class = static_cast<int>(arg(4, 40));
  spec.size = static_cast<int>(arg(5, 96));
  spec.seed = static_cast<std::uint64_t>(arg(6, 1));
  std::cout << scripta::testing::write_dataset(argv[1], spec).string() << "\n";
}
