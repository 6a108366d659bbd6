// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "unimts.hpp"

using namespace unimts;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

MotionTimeSeries random_series(std::size_t frames, std::size_t joints, Rng& rng) {
  MotionTimeSeries x(kImuChannels, frames, joints, 20.0);
  for (auto& v : x.data) v = rng.normal();
  return x;
}

SkeletonSequence single_joint(std::size_t frames, double fs, const std::function<Vec3(double)>& p,
                              const std::function<Quaternion(double)>& q) {
  SkeletonSequence seq(1, frames, fs);
  for (std::size_t t = 0; t < frames; ++t) {
    const double time = static_cast<double>(t) / fs;
    seq.position(0, t) = p(time);
    seq.orientation(0, t) = q(time);
  }
  return seq;
}

Outcome spin() {
  const auto t0 = Clock::now();
  const double omega = 3.0, fs = 100.0;
  const auto seq = single_joint(
      200, fs, [](double) { return Vec3{0, 0, 0}; },
      [&](double t) { return Quaternion{std::cos(omega * t / 2), 0, 0, std::sin(omega * t / 2)}; });
  const auto w = angular_velocity(seq, 0);
  double worst = 0;
  for (std::size_t t = 1; t + 1 < w.size(); ++t)
    worst = std::max({worst, std::abs(w[t][0]), std::abs(w[t][1]), std::abs(w[t][2] - omega)});
  const double secs = seconds_since(t0);
  return {worst < 1e-3 && secs < 1.0, fmt("max |w - (0,0,3)| = %.3g rad/s, %.3f s", worst, secs)};
}

Outcome circle() {
  const auto t0 = Clock::now();
  const double r = 0.5, omega = 2 * std::numbers::pi, fs = 100.0;
  const auto seq = single_joint(
      200, fs, [&](double t) { return Vec3{r * std::cos(omega * t), r * std::sin(omega * t), 0}; },
      [](double) { return Quaternion::identity(); });
  const auto a = linear_acceleration(seq, 0);
  const double expected = r * omega * omega;
  double worst = 0;
  for (std::size_t t = 1; t + 1 < a.size(); ++t) worst = std::max(worst, std::abs(norm(a[t]) - expected) / expected);
  const double secs = seconds_since(t0);
  return {worst < 0.01 && secs < 1.0, fmt("max relative error of |a| vs r*W^2 = %.3g, %.3f s", worst, secs)};
}

Outcome rotation_invariants() {
  const auto t0 = Clock::now();
  Rng rng(301);
  double norm_err = 0, inverse_err = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto x = random_series(16, 22, rng);
    const auto aug = rotate_augment(x, rng);
    for (std::size_t t = 0; t < x.frames; ++t)
      for (std::size_t v = 0; v < x.joints; ++v)
        for (std::size_t c : {0u, 3u})
          norm_err = std::max(norm_err, std::abs(norm(aug.series.triple(c, t, v)) - norm(x.triple(c, t, v))));
    std::vector<Rotation> inverse;
    for (const auto& rot : aug.rotations) inverse.push_back({quat_conj(rot.quaternion), transpose(rot.matrix)});
    const auto back = rotate_augment_with(aug.series, inverse);
    for (std::size_t i = 0; i < x.data.size(); ++i)
      inverse_err = std::max(inverse_err, std::abs(back.data[i] - x.data[i]));
  }
  const double secs = seconds_since(t0);
  return {norm_err < 1e-9 && inverse_err < 1e-9 && secs < 5.0,
          fmt("1000 trials: norm error %.3g, inverse error %.3g, %.2f s", norm_err, inverse_err, secs)};
}

Outcome so3_sampling() {
  Rng rng(302);
  double ortho = 0, det = 0;
  Vec3 sum{0, 0, 0};
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    const auto r = sample_uniform_rotation(rng);
    const auto rtr = matmul(transpose(r.matrix), r.matrix);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) ortho = std::max(ortho, std::abs(rtr[i][j] - (i == j ? 1.0 : 0.0)));
    det = std::max(det, std::abs(determinant(r.matrix) - 1.0));
    const auto x = mat_vec(r.matrix, {1, 0, 0});
    for (int i = 0; i < 3; ++i) sum[i] += x[i];
  }
  for (auto& s : sum) s /= n;
  const double mean = norm(sum);
  return {ortho < 1e-9 && det < 1e-9 && mean < 0.02,
          fmt("1e5 samples: max |RtR - I| %.3g, max |det - 1| %.3g, |mean R x| %.4f", ortho, det, mean)};
}

Outcome gradient_check() {
  const auto t0 = Clock::now();
  Rng rng(303);
  EncoderConfig cfg{{{6, 8, 3}, {8, 8, 3}}, Partition::Distance, 8};
  auto model = make_model<double>(cfg, smpl22(), {}, rng);
  const auto encoder = model.graph();
  std::vector<MotionTimeSeries> xs;
  for (int b = 0; b < 2; ++b) xs.push_back(random_series(16, 22, rng));
  diff::Tensor<double> text({2, 8});
  for (auto& v : text.values()) v = rng.normal();
  auto& lig = model.params.at(param_names::kLogInvGamma);
  const auto fn = [&](diff::Tape<double>& t) {
    std::vector<diff::Var<double>> g;
    for (const auto& x : xs) g.push_back(encoder.encode(t, model.params, x));
    return contrastive_loss(diff::stack(g), t.constant(text), diff::exp(t.parameter(lig)));
  };
  auto params = model.params.all();
  const auto r = diff::grad_check_detailed<double>(fn, params, 1e-5);
  const double secs = seconds_since(t0);
  std::size_t count = 0;
  for (const auto* p : params) count += p->value.size();
  return {r.max_rel_error < 1e-4 && secs < 60.0,
          fmt("%.0f parameters incl. temperature, max relative error %.3g, %.2f s", static_cast<double>(count),
              r.max_rel_error, secs) +
              " (worst: " + r.worst_parameter + ")"};
}

Outcome loss_closed_forms() {
  const double single = contrastive_loss_value({{0.3, -1.2, 2.0}}, {{1.5, 0.1, -0.4}}, 0.07);
  const double same = contrastive_loss_value({{0.6, 0.8}, {0.6, 0.8}}, {{0.6, 0.8}, {0.6, 0.8}}, 0.07);
  const double ortho = contrastive_loss_value({{1, 0}, {0, 1}}, {{1, 0}, {0, 1}}, 1.0);
  const double e_ln2 = std::abs(same - std::log(2.0));
  const double e_ortho = std::abs(ortho - std::log1p(std::exp(-1.0)));
  return {single == 0.0 && e_ln2 < 1e-9 && e_ortho < 1e-9,
          fmt("B=1 loss %.3g, |L - ln 2| %.3g, |L - ln(1+1/e)| %.3g", single, e_ln2, e_ortho)};
}

/// Lower bound of the mean batch loss when every sample of a class shares the
/// class's text pool: an anchor cannot rank its own text above same-class
/// texts, so each row costs at least log(same-class count in the batch).
/// Same-class counts are 1 + hypergeometric(b - 1; per_class - 1 of n - 1).
double same_class_floor(std::size_t n, std::size_t per_class, std::size_t batch) {
  auto log_choose = [](double a, double b) { return std::lgamma(a + 1) - std::lgamma(b + 1) - std::lgamma(a - b + 1); };
  auto expected_log = [&](std::size_t b) {
    double e = 0;
    for (std::size_t k = 0; k < b && k < per_class; ++k) {
      const double lp = log_choose(per_class - 1.0, k) + log_choose(double(n - per_class), double(b - 1 - k)) -
                        log_choose(n - 1.0, b - 1.0);
      if (b - 1 - k <= n - per_class) e += std::exp(lp) * std::log(1.0 + k);
    }
    return e;
  };
  double sum = 0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t b = std::min(batch, n - start);
    if (b < 2) continue;
    sum += expected_log(b);
    ++batches;
  }
  return sum / double(batches);
}

struct ToyRun {
  EvalReport report;
  double seconds = 0;
  double first_loss = 0, last_loss = 0;
};

ToyRun toy_run(bool rotation_augmentation) {
  const auto t0 = Clock::now();
  toy::Options o;
  const auto d = toy::make_dataset(o);
  EncoderConfig ec{{{6, 16, 5}, {16, 16, 5}}, Partition::Distance, o.dim};
  Rng rng(11);
  auto m = make_model<double>(ec, smpl22(), {}, rng);
  TrainConfig c;
  c.batch = 16;
  c.epochs = 200;
  c.lr = 1e-4;
  c.seed = 3;
  c.mask_min = 1;
  c.mask_max = 5;
  c.rotation_augmentation = rotation_augmentation;
  const auto res = pretrain(m, d.train, c, &d.embeddings);
  const auto labels = toy::labels(d);
  const auto test = toy::test_samples(d, c.simulation, 99);
  ToyRun out;
  out.report = evaluate(m, test, &labels, EvalMode::ZeroShot);
  out.seconds = seconds_since(t0);
  out.first_loss = res.epochs.front().mean_loss;
  out.last_loss = res.epochs.back().mean_loss;
  return out;
}

Outcome masking_soundness() {
  Rng rng(304);
  auto model = make_model<double>({{{6, 8, 3}, {8, 8, 3}}, Partition::Distance, 8}, smpl22(), {}, rng);
  const LabelSet labels{{"a", "b", "c"}, toy::orthonormal_vectors(3, 8, 305)};
  bool identical = true;
  for (int trial = 0; trial < 20; ++trial) {
    const auto raw = random_series(15, 22, rng);
    const auto mask = sample_joint_mask(22, 1, 5, rng);
    auto altered = raw;
    for (std::size_t v = 0; v < 22; ++v)
      if (!mask.contains(v))
        for (std::size_t c = 0; c < 6; ++c)
          for (std::size_t t = 0; t < 15; ++t) altered.at(c, t, v) = 1e3 * rng.normal();
    const auto a = zero_shot_classify(apply_mask(raw, mask), model, labels);
    const auto b = zero_shot_classify(apply_mask(altered, mask), model, labels);
    identical = identical && a.scores == b.scores && a.label == b.label;
  }
  DeviceMapping mapping;
  mapping.add("wrist", 20);
  DeviceRecording device{"wrist", DeviceChannels::AccelGyro, {}};
  for (std::size_t i = 0; i < 16 * 6; ++i) device.samples.push_back(rng.normal());
  const auto assigned = assign_to_joints(std::vector<DeviceRecording>{device}, mapping, 22, 20.0);
  MotionTimeSeries manual(kImuChannels, 16, 22, 20.0);
  for (std::size_t t = 0; t < 16; ++t)
    for (std::size_t c = 0; c < 6; ++c) manual.at(c, t, 20) = device.samples[t * 6 + c];
  manual = apply_mask(manual, JointMask{22, {20}});
  const bool same_tensor = assigned.data == manual.data && assigned.mask == manual.mask;
  const bool same_scores =
      zero_shot_classify(assigned, model, labels).scores == zero_shot_classify(manual, model, labels).scores;
  return {identical && same_tensor && same_scores,
          std::string("20 trials bit-identical: ") + (identical ? "yes" : "no") +
              ", assign_to_joints equals manual tensor: " + (same_tensor && same_scores ? "yes" : "no")};
}

std::vector<std::vector<double>> one_hot(const std::vector<std::size_t>& pred, std::size_t d) {
  std::vector<std::vector<double>> s(pred.size(), std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < pred.size(); ++i) s[i][pred[i]] = 1.0;
  return s;
}

Outcome metrics() {
  const auto hand = compute_metrics(std::vector<std::size_t>{0, 0, 1, 1}, one_hot({0, 1, 1, 1}, 2));
  const double expected_f1 = (2.0 / 3.0 + 4.0 / 5.0) / 2.0;
  const bool hand_ok = std::abs(hand.macro_f1 - expected_f1) < 1e-12 && std::abs(hand.macro_f1 - 0.7333) < 1e-4;
  Rng rng(306);
  bool r2_ok = true, d2_ok = true;
  for (int table = 0; table < 100; ++table) {
    const std::size_t n = 1 + rng.below(40), d = 2 + rng.below(6);
    std::vector<std::size_t> truth;
    std::vector<std::vector<double>> scores;
    for (std::size_t i = 0; i < n; ++i) {
      truth.push_back(rng.below(d));
      scores.emplace_back(d);
      for (auto& s : scores.back()) s = rng.below(4) * 0.5;
    }
    const auto r = compute_metrics(truth, scores);
    r2_ok = r2_ok && r.r_at_2 >= r.accuracy;
    if (d == 2) d2_ok = d2_ok && r.r_at_2 == 1.0;
  }
  return {hand_ok && r2_ok && d2_ok, fmt("hand case macro-F1 %.4f", hand.macro_f1) +
                                         ", R@2 >= acc on 100 tables: " + (r2_ok ? "yes" : "no") +
                                         ", D=2 gives R@2 = 1: " + (d2_ok ? "yes" : "no")};
}

std::string slurp(const std::filesystem::path& p) { return io::read_file(p); }

Outcome determinism_and_persistence() {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / ("unimts_acceptance_" + hex64(std::random_device{}()));
  fs::create_directories(dir);
  const std::string cli = std::string("'") + UNIMTS_CLI + "'";
  const std::string cd = "cd '" + dir.string() + "' && ";
  const std::string pre = cli +
                          " pretrain --data toy/skeletons --desc toy/descriptions --embeddings toy/embeddings.tsv"
                          " --epochs 3 --batch 8 --blocks 6:8:3,8:8:3 --seed 12 --deterministic --out ";
  bool ran = std::system((cd + cli + " make-toy --out toy --train-per-class 4 --test-per-class 2 > log 2>&1").c_str()) == 0;
  ran = ran && std::system((cd + pre + "a.ckpt >> log 2>&1").c_str()) == 0;
  ran = ran && std::system((cd + pre + "b.ckpt >> log 2>&1").c_str()) == 0;
  const bool runs_equal = ran && !slurp(dir / "a.ckpt").empty() && slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt");

  bool round_trip = false, frozen = false;
  if (ran) {
    auto model = io::load_checkpoint<double>(dir / "a.ckpt");
    io::save_checkpoint(dir / "c.ckpt", model);
    round_trip = slurp(dir / "a.ckpt") == slurp(dir / "c.ckpt");

    toy::Options o;
    o.train_per_class = 2;
    o.test_per_class = 2;
    const auto d = toy::make_dataset(o);
    const auto table = load_embeddings(dir / "toy" / "embeddings.tsv");
    const auto before = table;
    const auto labels = label_set_from_table(toy::class_names(), table);
    Rng rng(307);
    auto small = make_model<double>({{{6, 8, 3}, {8, 8, 3}}, Partition::Distance, 64}, smpl22(), {}, rng);
    finetune(small, toy::test_samples(d, {}, 308), labels, {2, 3, 1e-2, 0});
    auto trainable = make_model<double>({{{6, 8, 3}, {8, 8, 3}}, Partition::Distance, 8}, smpl22(),
                                        {TextMode::Trainable, 32, 4}, rng);
    const auto tokens = trainable.params.at(param_names::kTextTokens).value;
    const auto proj = trainable.params.at(param_names::kTextProj).value;
    finetune(trainable, toy::test_samples(d, {}, 310), label_set_from_model(toy::class_names(), trainable),
             {2, 3, 1e-2, 0});
    frozen = table == before && trainable.params.at(param_names::kTextTokens).value == tokens &&
             trainable.params.at(param_names::kTextProj).value == proj;
  }
  std::error_code ec;
  fs::remove_all(dir, ec);
  return {runs_equal && round_trip && frozen,
          std::string("--deterministic checkpoints identical: ") + (runs_equal ? "yes" : "no") +
              ", save/load/save identical: " + (round_trip ? "yes" : "no") +
              ", text table unchanged by fine-tuning: " + (frozen ? "yes" : "no")};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << std::endl;
    failures += o.pass ? 0 : 1;
  };
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("exception: ") + e.what()};
    }
  };

  report(1, "spin angular velocity", guarded(spin));
  report(2, "circle acceleration", guarded(circle));
  report(3, "rotation augmentation invariants", guarded(rotation_invariants));
  report(4, "SO(3) sampling", guarded(so3_sampling));
  report(5, "encoder and loss gradients", guarded(gradient_check));
  report(6, "loss closed forms", guarded(loss_closed_forms));

  ToyRun with_rot, without_rot;
  bool toy_ok = true;
  std::string toy_error;
  try {
    with_rot = toy_run(true);
    without_rot = toy_run(false);
  } catch (const std::exception& e) {
    toy_ok = false;
    toy_error = std::string("exception: ") + e.what();
  }
  if (toy_ok) {
    const auto& r = with_rot.report;
    report(7, "toy zero-shot",
           {r.accuracy >= 0.95 && r.r_at_2 == 1.0 && with_rot.seconds < 300.0,
            fmt("acc %.4f, R@2 %.4f, macro-F1 %.4f, %.1f s", r.accuracy, r.r_at_2, r.macro_f1, with_rot.seconds) +
                fmt(", loss %.3f -> %.3f", with_rot.first_loss, with_rot.last_loss)});
    const double floor = same_class_floor(150, 50, 16);
    std::cout << "INFO pretrain loss ratio on the toy set: "
              << fmt("%.3f (target < 0.1); same-class floor %.3f, floor ratio %.3f", with_rot.last_loss / with_rot.first_loss,
                     floor, floor / with_rot.first_loss)
              << std::endl;
    const double a = with_rot.report.accuracy, b = without_rot.report.accuracy;
    report(8, "rotation augmentation ablation",
           {b <= a && a - b >= 0.10,
            fmt("with rotation augmentation %.4f, without %.4f, gap %.1f points, %.1f s", a, b, 100 * (a - b),
                without_rot.seconds)});
  } else {
    report(7, "toy zero-shot", {false, toy_error});
    report(8, "rotation augmentation ablation", {false, toy_error});
  }

  report(9, "masking soundness", guarded(masking_soundness));
  report(10, "metrics", guarded(metrics));
  report(11, "determinism and persistence", guarded(determinism_and_persistence));
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
