#include <filesystem>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "jeanie/checkpoint.hpp"
#include "jeanie/config.hpp"
#include "jeanie/error.hpp"
#include "jeanie/io.hpp"

using namespace jeanie;
using namespace jeanie::io;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::Argument;
}

fsar::Model small_model(std::mt19937_64& rng, bool with_dict) {
  fsar::Model m{encoder::LinearBlockEncoder::random(4, 3, 2, rng),
                encoder::LinearBlockEncoder::random(4, 3, 2, rng), std::nullopt};
  if (with_dict) m.dictionary = coding::Dictionary(Eigen::MatrixXd::Random(12, 5), 4, 3);
  return m;
}

}  // namespace

TEST(SequenceText, ParsesHeaderAndFrames) {
  const auto seq = parse_sequence_text("{\"joints\": 2, \"hip_index\": 1, \"fps\": 30}\n"
                                       "0,1,2,3,4,5\r\n\n-1.5,0,0,0,0,1e-3\n");
  EXPECT_EQ(seq.frames(), 2u);
  EXPECT_EQ(seq.joints(), 2u);
  EXPECT_EQ(seq.hip_index(), 1u);
  EXPECT_EQ(seq.fps(), 30.0);
  EXPECT_EQ(seq.joint(1, 0).x(), -1.5);
  EXPECT_EQ(seq.joint(1, 1).z(), 1e-3);
}

TEST(SequenceText, RoundTripIsExact) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  SkeletonSequence seq(7, 5, 2);
  for (double& v : seq.values()) v = n(rng) * 1e3;
  seq.values()[0] = std::numeric_limits<double>::denorm_min();
  seq.values()[1] = -0.0;
  const std::string text = format_sequence(seq);
  const auto back = parse_sequence_text(text);
  EXPECT_EQ(back, seq);
  EXPECT_TRUE(std::signbit(back.values()[1]));
  EXPECT_EQ(format_sequence(back), text);
}

TEST(SequenceText, Errors) {
  EXPECT_EQ(kind_of([] { parse_sequence_text("{\"joints\": 2, \"hip_index\": 0}\n"); }), ErrorKind::Parse);
  EXPECT_EQ(kind_of([] { parse_sequence_text("{\"joints\": 1, \"hip_index\": 0}\n1,2\n"); }), ErrorKind::Parse);
  EXPECT_EQ(kind_of([] { parse_sequence_text("{\"joints\": 1, \"hip_index\": 0}\n1,2,x\n"); }), ErrorKind::Parse);
  EXPECT_EQ(kind_of([] { parse_sequence_text("not json\n1,2,3\n"); }), ErrorKind::Parse);
  EXPECT_EQ(kind_of([] { parse_sequence_text("{\"joints\": 1, \"hip_index\": 4}\n1,2,3\n"); }), ErrorKind::Layout);
  EXPECT_EQ(kind_of([] { parse_sequence("/nonexistent/seq.txt"); }), ErrorKind::Io);
}

TEST(SequenceText, FileRoundTrip) {
  SkeletonSequence seq(2, 1, 0, 25.0);
  seq.joint(1, 0) = Eigen::Vector3d(0.1, 0.2, 0.3);
  const auto path = (std::filesystem::temp_directory_path() / "jeanie_io_seq.txt").string();
  write_sequence(seq, path);
  EXPECT_EQ(parse_sequence(path), seq);
  std::filesystem::remove(path);
}

TEST(FormatDouble, Shortest) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(RunConfig, DefaultsAndOverrides) {
  const auto cfg = parse_run_config(R"({"seed": 4, "supervised": {"iterations": 7},
                                        "representation": {"grid": {"eta_az": 2, "eta_alt": 1}}})");
  EXPECT_EQ(cfg.seed, 4u);
  EXPECT_EQ(cfg.fsar.supervised.iterations, 7);
  EXPECT_EQ(cfg.fsar.representation.grid.eta_az, 2);
  EXPECT_EQ(cfg.fsar.unsupervised.dictionary_size, RunConfig{}.fsar.unsupervised.dictionary_size);
}

TEST(RunConfig, JsonRoundTrip) {
  auto cfg = parse_run_config(R"({"fusion": {"rho": 0.25}, "evaluation": {"seeds": [3, 4]}})");
  const auto again = parse_run_config(to_json_text(cfg));
  EXPECT_EQ(to_json_text(again), to_json_text(cfg));
  EXPECT_EQ(again.fsar.fusion.rho, 0.25);
  EXPECT_EQ(again.evaluation.seeds, (std::vector<std::uint64_t>{3, 4}));
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  EXPECT_EQ(kind_of([] { parse_run_config(R"({"sede": 1})"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { parse_run_config(R"({"supervised": {"iteration": 1}})"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { parse_run_config(R"({"supervised": {"iterations": -1}})"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { parse_run_config(R"({"seed": "one"})"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { parse_run_config("{"); }), ErrorKind::Parse);
}

TEST(RunConfig, HashIgnoresJobsAndEvaluation) {
  RunConfig a;
  RunConfig b = a;
  b.jobs = 8;
  b.evaluation.episodes = 3;
  EXPECT_EQ(model_hash(a), model_hash(b));
  b.fsar.supervised.learning_rate = 2e-3;
  EXPECT_NE(model_hash(a), model_hash(b));
  b = a;
  b.seed = 2;
  EXPECT_NE(model_hash(a), model_hash(b));
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
}

TEST(Enums, NamesRoundTrip) {
  for (auto m : {alignment::Method::JEANIE, alignment::Method::FVM, alignment::Method::SoftDTW})
    EXPECT_EQ(enum_from<alignment::Method>(enum_name(m)), m);
  EXPECT_EQ(kind_of([] { enum_from<coding::CoderKind>("nope"); }), ErrorKind::Config);
}

TEST(Checkpoint, SerializeRoundTrip) {
  std::mt19937_64 rng(2);
  RunConfig cfg;
  const auto model = small_model(rng, true);
  const auto ck = make_checkpoint(model, cfg, fsar::RngStreams(5), "maml");
  const auto bytes = serialize_checkpoint(ck);
  EXPECT_EQ(bytes.substr(0, 8), "JEANIECK");
  EXPECT_EQ(deserialize_checkpoint(bytes), ck);
  const auto back = model_from_checkpoint(deserialize_checkpoint(bytes), cfg);
  EXPECT_EQ(back.encoder.weights(), model.encoder.weights());
  EXPECT_EQ(back.unsup_encoder.bias(), model.unsup_encoder.bias());
  ASSERT_TRUE(back.dictionary.has_value());
  EXPECT_EQ(*back.dictionary, *model.dictionary);
  EXPECT_EQ(to_json_text(config_from_checkpoint(ck)), to_json_text(cfg));
}

TEST(Checkpoint, FileRoundTripWithoutDictionary) {
  std::mt19937_64 rng(3);
  RunConfig cfg;
  const auto ck = make_checkpoint(small_model(rng, false), cfg, fsar::RngStreams(1), "sup");
  const auto path = (std::filesystem::temp_directory_path() / "jeanie_ck_test.bin").string();
  write_checkpoint(ck, path);
  EXPECT_EQ(read_checkpoint(path), ck);
  EXPECT_FALSE(model_from_checkpoint(ck, cfg).dictionary.has_value());
  std::filesystem::remove(path);
}

TEST(Checkpoint, Mismatch) {
  std::mt19937_64 rng(4);
  RunConfig cfg;
  const auto ck = make_checkpoint(small_model(rng, false), cfg, fsar::RngStreams(1), "sup");
  RunConfig other = cfg;
  other.fsar.representation.d_prime = 7;
  EXPECT_EQ(kind_of([&] { model_from_checkpoint(ck, other); }), ErrorKind::CheckpointMismatch);
}

TEST(Checkpoint, CorruptBytes) {
  std::mt19937_64 rng(5);
  const auto bytes = serialize_checkpoint(make_checkpoint(small_model(rng, false), RunConfig{},
                                                          fsar::RngStreams(1), "sup"));
  EXPECT_EQ(kind_of([&] { deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)); }), ErrorKind::Parse);
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(kind_of([&] { deserialize_checkpoint(bad); }), ErrorKind::Parse);
}

TEST(LoadData, Manifest) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "jeanie_manifest_test";
  fs::create_directories(dir);
  std::string manifest;
  for (int i = 0; i < 4; ++i) {
    SkeletonSequence seq(3, 1, 0);
    seq.joint(0, 0) = Eigen::Vector3d(i, 0, 0);
    write_sequence(seq, (dir / ("s" + std::to_string(i) + ".txt")).string());
    manifest += "s" + std::to_string(i) + ".txt," + std::to_string(i % 2) + "\n";
  }
  write_file((dir / "list.csv").string(), manifest);
  DataConfig cfg;
  cfg.source = DataSource::Manifest;
  cfg.manifest = "list.csv";
  cfg.train_classes = 1;
  const auto data = load_data(cfg, dir.string());
  EXPECT_EQ(data.corpus.size(), 4u);
  EXPECT_EQ(data.split.train, (std::vector<int>{0, 2}));
  EXPECT_EQ(data.split.test, (std::vector<int>{1, 3}));
  EXPECT_EQ(data.corpus[3].sequence.joint(0, 0).x(), 3.0);
  fs::remove_all(dir);
}
