// Pre-trains a small encoder on the synthetic three-activity set and
// classifies held-out, randomly rotated and masked recordings zero-shot.
//
//   toy_zero_shot [epochs]

#include <cstdlib>
#include <iostream>
#include <string>

#include "unimts.hpp"

int main(int argc, char** argv) {
  using namespace unimts;
  const std::size_t epochs = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 40;

  toy::Options options;
  const auto data = toy::make_dataset(options);

  EncoderConfig encoder{{{6, 16, 5}, {16, 16, 5}}, Partition::Distance, options.dim};
  Rng rng(11);
  auto model = make_model<double>(encoder, smpl22(), TextEncoderConfig{}, rng);

  TrainConfig cfg;
  cfg.batch = 16;
  cfg.epochs = epochs;
  cfg.lr = 1e-4;
  cfg.seed = 3;
  std::cout << "epoch\tloss\t1/gamma\n";
  pretrain(model, data.train, cfg, &data.embeddings, &std::cout);

  const auto labels = toy::labels(data);
  const auto test = toy::test_samples(data, cfg.simulation, 99);
  const auto report = evaluate(model, test, &labels, EvalMode::ZeroShot);
  std::cout << format_report(report, labels.names);
  return 0;
}
