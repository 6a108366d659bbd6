#include <algorithm>
#include <cstring>
#include <functional>

#include "test_util.hpp"

namespace unimts {
namespace {

TEST(SkeletonFile, ParsesHeaderAndFrames) {
  const std::string text =
      "1 3 20\n"
      "0 0 0 1 0 0 0\n"
      "0.5 0 0 1 0 0 0\n"
      "1 0 0 0 0 0 1\n";
  const auto seq = io::parse_skeleton(text, "s.skel");
  EXPECT_EQ(seq.joints, 1u);
  EXPECT_EQ(seq.frames, 3u);
  EXPECT_EQ(seq.frame_rate, 20.0);
  EXPECT_EQ(seq.position(0, 1), (Vec3{0.5, 0, 0}));
  EXPECT_EQ(seq.orientation(0, 2), (Quaternion{0, 0, 0, 1}));
}

TEST(SkeletonFile, ShortRowNamesTheLine) {
  const std::string text = "1 3 20\n0 0 0 1 0 0\n0 0 0 1 0 0 0\n0 0 0 1 0 0 0\n";
  try {
    io::parse_skeleton(text, "s.skel");
    FAIL() << "expected ParseError";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ParseError);
    EXPECT_NE(std::string(e.what()).find("s.skel:2:"), std::string::npos) << e.what();
  }
}

TEST(SkeletonFile, NearUnitQuaternionsAreNormalizedWithWarning) {
  const std::string text = "1 3 20\n0 0 0 1.05 0 0 0\n0 0 0 1 0 0 0\n0 0 0 1 0 0 0\n";
  std::vector<std::string> warnings;
  const auto seq = io::parse_skeleton(text, "s.skel", &warnings);
  EXPECT_EQ(seq.orientation(0, 0), Quaternion::identity());
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("s.skel:2"), std::string::npos);
}

TEST(SkeletonFile, BadQuaternions) {
  EXPECT_ERROR_KIND(io::parse_skeleton("1 3 20\n0 0 0 2 0 0 0\n0 0 0 1 0 0 0\n0 0 0 1 0 0 0\n", "s"),
                    ErrorKind::BadQuaternion);
  EXPECT_ERROR_KIND(io::parse_skeleton("1 3 20\n0 0 0 0 0 0 0\n0 0 0 1 0 0 0\n0 0 0 1 0 0 0\n", "s"),
                    ErrorKind::BadQuaternion);
}

TEST(SkeletonFile, RoundTripKeepsValues) {
  toy::Options o;
  Rng rng(170);
  const auto seq = toy::make_sequence(1, o, rng);
  const auto back = io::parse_skeleton(io::format_skeleton(seq), "s");
  EXPECT_EQ(back.positions, seq.positions);
  for (std::size_t i = 0; i < seq.orientations.size(); ++i) {  // parser renormalizes
    const auto& a = back.orientations[i];
    const auto& b = seq.orientations[i];
    EXPECT_LT(std::max({std::abs(a.w - b.w), std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.z - b.z)}), 1e-15);
  }
  EXPECT_EQ(back.frame_rate, seq.frame_rate);
}

TEST(SkeletonFile, HeaderErrors) {
  EXPECT_ERROR_KIND(io::parse_skeleton("", "s"), ErrorKind::ParseError);
  EXPECT_ERROR_KIND(io::parse_skeleton("1 2 20\n", "s"), ErrorKind::ParseError);
  EXPECT_ERROR_KIND(io::parse_skeleton("1 3 -20\n", "s"), ErrorKind::ParseError);
  EXPECT_ERROR_KIND(io::parse_skeleton("1 3 20 7\n", "s"), ErrorKind::ParseError);
  EXPECT_ERROR_KIND(io::parse_skeleton("1 3 20\n0 0 0 1 0 0 0\n", "s"), ErrorKind::ParseError);
}

MotionTimeSeries masked_series(Rng& rng) {
  auto x = testing::random_series(9, 22, rng);
  return apply_mask(x, sample_joint_mask(22, 1, 5, rng));
}

TEST(TimeSeriesFile, TextRoundTrip) {
  Rng rng(171);
  const auto x = masked_series(rng);
  const auto back = io::parse_timeseries_text(io::format_timeseries_text(x), "x");
  EXPECT_EQ(back.mask, x.mask);
  EXPECT_EQ(back.sample_rate, x.sample_rate);
  for (std::size_t i = 0; i < x.data.size(); ++i) EXPECT_NEAR(back.data[i], x.data[i], 1e-9);
}

TEST(TimeSeriesFile, BinaryRoundTripIsBitExact) {
  Rng rng(172);
  const auto x = masked_series(rng);
  const auto bytes = io::encode_timeseries_binary(x);
  const auto back = io::decode_timeseries_binary(bytes, "x");
  EXPECT_EQ(std::memcmp(back.data.data(), x.data.data(), x.data.size() * sizeof(double)), 0);
  EXPECT_EQ(back.mask, x.mask);
  EXPECT_EQ(io::encode_timeseries_binary(back), bytes);
}

TEST(TimeSeriesFile, FilesDetectFormat) {
  Rng rng(173);
  const auto x = masked_series(rng);
  testing::TempDir dir("ts_files");
  io::write_timeseries_file(dir / "a.txt", x);
  io::write_timeseries_file(dir / "a.bin", x, true);
  EXPECT_EQ(io::read_timeseries_file(dir / "a.bin").data, x.data);
  EXPECT_EQ(io::read_timeseries_file(dir / "a.txt").mask, x.mask);
  EXPECT_ERROR_KIND(io::read_timeseries_file(dir / "missing.txt"), ErrorKind::Io);
}

TEST(TimeSeriesFile, MaskedJointWithDataIsRejected) {
  EXPECT_ERROR_KIND(io::parse_timeseries_text("2 1 20 1\n1 0\n0.5 0.25\n", "x"), ErrorKind::ParseError);
  EXPECT_NO_THROW(io::parse_timeseries_text("2 1 20 1\n1 0\n0.5 0\n", "x"));
  EXPECT_ERROR_KIND(io::parse_timeseries_text("2 1 20 1\n1 2\n0.5 0\n", "x"), ErrorKind::ParseError);
}

TEST(TimeSeriesFile, BinaryCorruption) {
  Rng rng(174);
  const auto bytes = io::encode_timeseries_binary(masked_series(rng));
  EXPECT_ERROR_KIND(io::decode_timeseries_binary(bytes.substr(0, bytes.size() - 1), "x"), ErrorKind::ParseError);
  auto version = bytes;
  version[4] = 9;
  EXPECT_ERROR_KIND(io::decode_timeseries_binary(version, "x"), ErrorKind::VersionMismatch);
}

TEST(EmbeddingFile, DuplicateId) {
  EXPECT_ERROR_KIND(io::parse_embeddings("2 1\na\tx\t1\na\ty\t2\n", "e"), ErrorKind::DuplicateId);
  EXPECT_ERROR_KIND(io::parse_embeddings("2 1\na\tx\t1\n", "e"), ErrorKind::ParseError);
  EXPECT_ERROR_KIND(io::parse_embeddings("1 1\na x 1\n", "e"), ErrorKind::ParseError);
}

TEST(StructureFile, RoundTripAndErrors) {
  const auto s = smpl22();
  const auto back = io::parse_structure(io::format_structure(s), "st");
  EXPECT_EQ(back.names, s.names);
  EXPECT_EQ(back.parents, s.parents);
  EXPECT_ERROR_KIND(io::parse_structure("a -\nb c\n", "st"), ErrorKind::ParseError);
  EXPECT_ERROR_KIND(io::parse_structure("a -\nb -\n", "st"), ErrorKind::ParseError);
  EXPECT_ERROR_KIND(io::parse_structure("a -\na a\n", "st"), ErrorKind::ParseError);
  EXPECT_ERROR_KIND(io::parse_structure("# nothing\n", "st"), ErrorKind::ParseError);
}

TEST(DescriptionFile, OriginalsThenParaphrases) {
  const auto ds = io::parse_descriptions("# comment\n a person walks \n\n--\nsomeone strolls\n", "d", "seq7");
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds[0], (Description{"seq7:0", "a person walks", false}));
  EXPECT_EQ(ds[1], (Description{"seq7:1", "someone strolls", true}));
  EXPECT_EQ(io::parse_descriptions(io::format_descriptions(ds), "d", "seq7"), ds);
  EXPECT_ERROR_KIND(io::parse_descriptions("\n# only\n", "d", "s"), ErrorKind::Empty);
  EXPECT_ERROR_KIND(io::parse_descriptions("a\n--\nb\n--\nc\n", "d", "s"), ErrorKind::ParseError);
}

TEST(MappingFile, NamesAndIndices) {
  const auto m = io::parse_mapping("wrist right_wrist\n# c\nhip 0\n", "m", smpl22());
  EXPECT_EQ(m.at("wrist"), 21u);
  EXPECT_EQ(m.at("hip"), 0u);
  EXPECT_ERROR_KIND(io::parse_mapping("wrist 22\n", "m", smpl22()), ErrorKind::ParseError);
  EXPECT_ERROR_KIND(io::parse_mapping("wrist 1\nwrist 2\n", "m", smpl22()), ErrorKind::ParseError);
  EXPECT_ERROR_KIND(io::parse_mapping("wrist\n", "m", smpl22()), ErrorKind::ParseError);
}

TEST(ManifestFile, ParsesSamples) {
  const auto m = io::parse_manifest(
      "mapping map.txt\nlabels sit stand\nsample rec/a.txt stand 50 9.81 wrist:a,hip:ag\n", "man", "/data");
  EXPECT_EQ(m.mapping_path, std::filesystem::path("/data/map.txt"));
  EXPECT_EQ(m.labels, (std::vector<std::string>{"sit", "stand"}));
  ASSERT_EQ(m.samples.size(), 1u);
  const auto& s = m.samples[0];
  EXPECT_EQ(s.path, std::filesystem::path("/data/rec/a.txt"));
  EXPECT_EQ(s.label, "stand");
  EXPECT_EQ(s.sample_rate, 50.0);
  EXPECT_EQ(s.unit_scale, 9.81);
  ASSERT_EQ(s.devices.size(), 2u);
  EXPECT_EQ(s.devices[0].channels, DeviceChannels::Accel);
  EXPECT_EQ(s.devices[1].location, "hip");
  EXPECT_EQ(m.label_index("stand"), 1u);
}

TEST(ManifestFile, Errors) {
  const std::string head = "mapping m\nlabels a b\n";
  for (const std::string& bad : {head + "sample r c 20 1 w:a\n", head + "sample r a 20 1 w:x\n",
                                head + "sample r a 0 1 w:a\n", head + "sample r a 20 1 w:a,w:ag\n",
                                std::string("labels a b\n"), std::string("mapping m\nlabels a\n"),
                                head + "bogus\n", head + "sample r a 20 w:a\n"})
    EXPECT_ERROR_KIND(io::parse_manifest(bad, "man", "."), ErrorKind::ParseError);
}

TEST(RecordingFile, SplitsColumnsByDevice) {
  const std::vector<io::DeviceSpec> specs{{"w", DeviceChannels::Accel}, {"h", DeviceChannels::AccelGyro}};
  const auto recs = io::parse_recording("2 9\n1 2 3 4 5 6 7 8 9\n10 11 12 13 14 15 16 17 18\n", "r", specs);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].samples, (std::vector<double>{1, 2, 3, 10, 11, 12}));
  EXPECT_EQ(recs[1].frames(), 2u);
  EXPECT_EQ(recs[1].samples[6], 13.0);
  EXPECT_EQ(io::parse_recording(io::format_recording(recs), "r", specs)[1].samples, recs[1].samples);
  EXPECT_ERROR_KIND(io::parse_recording("2 6\n1 2 3 4 5 6\n1 2 3 4 5 6\n", "r", specs), ErrorKind::ParseError);
}

TEST(LabeledDataset, ScalesAccelAndResamples) {
  testing::TempDir dir("labeled");
  io::write_file(dir / "map.txt", "wrist right_wrist\n");
  io::write_file(dir / "r.txt", "3 6\n1 0 0 1 0 0\n2 0 0 1 0 0\n3 0 0 1 0 0\n");
  io::write_file(dir / "man.txt", "mapping map.txt\nlabels a b\nsample r.txt b 40 2 wrist:ag\n");
  Rng rng(175);
  const auto model = make_model<double>(testing::small_encoder(), smpl22(), {}, rng);
  const auto ds = load_labeled_dataset(io::read_manifest_file(dir / "man.txt"), model, {"a", "b"});
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds[0].label, 1u);
  EXPECT_EQ(ds[0].x.frames, 2u);
  EXPECT_EQ(ds[0].x.sample_rate, 20.0);
  EXPECT_EQ(ds[0].x.at(0, 1, 21), 6.0);  // 3 m/s^2 scaled by 2, frame 2 of the 40 Hz input
  EXPECT_EQ(ds[0].x.at(3, 1, 21), 1.0);  // gyro is not scaled
  EXPECT_ERROR_KIND(load_labeled_dataset(io::read_manifest_file(dir / "man.txt"), model, {"a", "c"}),
                    ErrorKind::UnknownId);
}

Model<double> trained_model(std::uint64_t seed, TextMode mode = TextMode::File) {
  Rng rng(seed);
  auto m = make_model<double>(testing::small_encoder(), smpl22(), {mode, 16, 3}, rng);
  m.window_frames = 40;
  return m;
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  for (const auto mode : {TextMode::File, TextMode::Trainable}) {
    auto m = trained_model(176, mode);
    Rng rng(177);
    const std::vector<LabeledSample> data{{testing::random_series(8, 22, rng), 0}};
    finetune(m, data, {{"x", "y"}, {std::vector<double>(8, 0.1), std::vector<double>(8, -0.1)}}, {1, 1, 1e-3, 0});
    testing::TempDir dir("ckpt");
    io::save_checkpoint(dir / "a.ckpt", m);
    const auto loaded = io::load_checkpoint<double>(dir / "a.ckpt");
    io::save_checkpoint(dir / "b.ckpt", loaded);
    EXPECT_EQ(io::read_file(dir / "a.ckpt"), io::read_file(dir / "b.ckpt"));
    EXPECT_EQ(loaded.class_names, m.class_names);
    EXPECT_EQ(loaded.window_frames, 40u);
    EXPECT_EQ(loaded.text, m.text);
    EXPECT_EQ(loaded.encoder, m.encoder);
    for (std::size_t i = 0; i < m.params.size(); ++i) {
      EXPECT_EQ(loaded.params.items()[i].value, m.params.items()[i].value);
      EXPECT_EQ(loaded.params.items()[i].trainable, m.params.items()[i].trainable);
    }
  }
}

TEST(Checkpoint, LoadedModelPredictsIdentically) {
  const auto m = trained_model(178);
  const auto loaded = io::decode_checkpoint<double>(io::encode_checkpoint(m), "c");
  Rng rng(179);
  const auto x = testing::random_series(12, 22, rng);
  EXPECT_EQ(embed_series(x, loaded), embed_series(x, m));
}

std::string with_crc(std::string body) {
  body.resize(body.size() - 4);
  io::ByteWriter w;
  w.raw(body);
  w.u32(io::crc32_of(body));
  return w.take();
}

TEST(Checkpoint, CorruptionIsDetected) {
  const auto bytes = io::encode_checkpoint(trained_model(180));
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{40}, bytes.size() - 1})
    EXPECT_ERROR_KIND(io::decode_checkpoint<double>(bytes.substr(0, cut), "c"), ErrorKind::CorruptCheckpoint);
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  EXPECT_ERROR_KIND(io::decode_checkpoint<double>(flipped, "c"), ErrorKind::CorruptCheckpoint);
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_ERROR_KIND(io::decode_checkpoint<double>(magic, "c"), ErrorKind::CorruptCheckpoint);
}

TEST(Checkpoint, VersionBump) {
  auto bytes = io::encode_checkpoint(trained_model(181));
  bytes[8] = static_cast<char>(io::kCheckpointVersion + 1);
  EXPECT_ERROR_KIND(io::decode_checkpoint<double>(with_crc(bytes), "c"), ErrorKind::VersionMismatch);
}

TEST(Checkpoint, SkeletonMismatch) {
  const auto bytes = io::encode_checkpoint(trained_model(182));
  const auto other = chain_skeleton(22);
  const auto same = smpl22();
  EXPECT_ERROR_KIND(io::decode_checkpoint<double>(bytes, "c", &other), ErrorKind::SkeletonMismatch);
  EXPECT_NO_THROW(io::decode_checkpoint<double>(bytes, "c", &same));
}

TEST(Checkpoint, MissingOrMisshapenParameters) {
  auto m = trained_model(183);
  auto missing = m;
  missing.params = {};
  for (const auto& p : m.params.items())
    if (p.name != param_names::kProjBias) missing.params.add(p.name, p.value);
  EXPECT_ERROR_KIND(io::decode_checkpoint<double>(io::encode_checkpoint(missing), "c"), ErrorKind::CorruptCheckpoint);
  auto reshaped = m;
  reshaped.params.at(param_names::kProjBias).value = diff::Tensor<double>({3});
  EXPECT_ERROR_KIND(io::decode_checkpoint<double>(io::encode_checkpoint(reshaped), "c"),
                    ErrorKind::CorruptCheckpoint);
  auto nan = m;
  nan.params.at(param_names::kProjBias).value[0] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_ERROR_KIND(io::decode_checkpoint<double>(io::encode_checkpoint(nan), "c"), ErrorKind::CorruptCheckpoint);
}

TEST(Checkpoint, DeterministicPretrainRunsAreByteIdentical) {
  toy::Options o;
  o.train_per_class = 2;
  o.dim = 16;
  const auto data = toy::make_dataset(o);
  TrainConfig cfg;
  cfg.batch = 4;
  cfg.epochs = 2;
  cfg.seed = 4;
  cfg.deterministic = true;
  std::string bytes[2];
  for (auto& b : bytes) {
    Rng rng(184);
    auto m = make_model<double>(testing::small_encoder(16), smpl22(), {}, rng);
    pretrain(m, data.train, cfg, &data.embeddings);
    b = io::encode_checkpoint(m);
  }
  EXPECT_EQ(bytes[0], bytes[1]);
}

/// Runs `parse` on random buffers and on byte-level mutations of `seed`;
/// only unimts::Error may escape.
void fuzz(const std::string& name, const std::string& seed, const std::function<void(const std::string&)>& parse,
          std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  const std::string alphabet = "0123456789 .-+eE\n\t:,#abn-";
  for (int trial = 0; trial < 400; ++trial) {
    std::string input;
    if (trial % 4 == 0) {
      const std::size_t n = rng.below(64);
      for (std::size_t i = 0; i < n; ++i) input += static_cast<char>(rng.below(256));
    } else if (trial % 4 == 1) {
      const std::size_t n = rng.below(80);
      for (std::size_t i = 0; i < n; ++i) input += alphabet[rng.below(alphabet.size())];
    } else {
      input = seed;
      const std::size_t edits = 1 + rng.below(4);
      for (std::size_t e = 0; e < edits && !input.empty(); ++e) {
        const std::size_t pos = rng.below(input.size());
        switch (rng.below(4)) {
          case 0: input[pos] = static_cast<char>(rng.below(256)); break;
          case 1: input.erase(pos, 1 + rng.below(8)); break;
          case 2: input.insert(pos, 1, alphabet[rng.below(alphabet.size())]); break;
          default: input.resize(pos); break;
        }
      }
    }
    try {
      parse(input);
    } catch (const Error&) {
    } catch (const std::exception& e) {
      ADD_FAILURE() << name << " trial " << trial << " leaked " << typeid(e).name() << ": " << e.what();
    }
  }
}

TEST(Fuzz, TextReaders) {
  Rng rng(185);
  toy::Options o;
  o.duration = 0.1;
  const auto seq = toy::make_sequence(0, o, rng);
  const auto ts = masked_series(rng);
  TextEmbeddingTable table(2);
  table.add("a", "x y", {1, 2});
  table.add("b", "z", {3, 4});
  const std::vector<io::DeviceSpec> specs{{"w", DeviceChannels::Accel}};
  fuzz("skeleton", io::format_skeleton(seq), [](const std::string& s) { io::parse_skeleton(s, "f"); }, 1);
  fuzz("timeseries", io::format_timeseries_text(ts), [](const std::string& s) { io::parse_timeseries_text(s, "f"); },
       2);
  fuzz("embeddings", io::format_embeddings(table), [](const std::string& s) { io::parse_embeddings(s, "f"); }, 3);
  fuzz("structure", io::format_structure(smpl22()), [](const std::string& s) { io::parse_structure(s, "f"); }, 4);
  fuzz("descriptions", "a b\n--\nc d\n", [](const std::string& s) { io::parse_descriptions(s, "f", "x"); }, 5);
  fuzz("mapping", "wrist right_wrist\nhip 0\n", [](const std::string& s) { io::parse_mapping(s, "f", smpl22()); }, 6);
  fuzz("manifest", "mapping m\nlabels a b\nsample r a 20 1 w:a,h:ag\n",
       [](const std::string& s) { io::parse_manifest(s, "f", "."); }, 7);
  fuzz("recording", "2 3\n1 2 3\n4 5 6\n", [&](const std::string& s) { io::parse_recording(s, "f", specs); }, 8);
}

TEST(Fuzz, BinaryReaders) {
  Rng rng(186);
  const auto ts = io::encode_timeseries_binary(masked_series(rng));
  const auto ckpt = io::encode_checkpoint(trained_model(187, TextMode::Trainable));
  fuzz("timeseries-bin", ts, [](const std::string& s) { io::decode_timeseries_binary(s, "f"); }, 9);
  fuzz("checkpoint", ckpt, [](const std::string& s) { io::decode_checkpoint<double>(s, "f"); }, 10);
  // Re-sealed mutations get past the CRC and exercise the field checks.
  fuzz("checkpoint-crc", ckpt,
       [](const std::string& s) {
         if (s.size() >= 4) io::decode_checkpoint<double>(with_crc(s), "f");
       },
       11);
}

}  // namespace
}  // namespace unimts
