/**
 * Copyright (c) The sitecl Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "sitecl/audit.hpp"
#include "sitecl/errors.hpp"
#include "sitecl/storage.hpp"

namespace sitecl {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("sitecl_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

void flip_byte(const fs::path& p, std::size_t offset) {
  std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
  f.seekg(static_cast<std::streamoff>(offset));
  char c;
  f.get(c);
  f.seekp(static_cast<std::streamoff>(offset));
  f.put(static_cast<char>(c ^ 0x01));
}

using Storage = TempDir;

TEST(Checksum, KnownValues) {
  EXPECT_EQ(checksum_hex(std::span<const unsigned char>{}), "cbf29ce484222325");
  const unsigned char a[] = {'a'};
  EXPECT_EQ(checksum_hex(a), "af63dc4c8601ec8c");
}

TEST_F(Storage, DatasetRoundTrip) {
  const auto d = make_site({3, 0.6, -0.45, 0.1, 1.6, 0.15}, 7, {9, 8}, Rng(11));
  write_dataset(d, dir_ / "site", 11);
  const auto back = read_dataset(dir_ / "site");
  EXPECT_EQ(back.site_id, d.site_id);
  EXPECT_EQ(back.images, d.images);
  EXPECT_EQ(back.masks, d.masks);
  EXPECT_EQ(back.source_index, d.source_index);
  EXPECT_EQ(back.style, d.style);
}

TEST_F(Storage, DatasetChecksumMismatch) {
  const auto d = make_site({1, 1.0, 0.0, 0.1, 0.0, 0.15}, 3, {8, 8}, Rng(1));
  write_dataset(d, dir_ / "site", 1);
  flip_byte(dir_ / "site.bin", 64);
  EXPECT_THROW(read_dataset(dir_ / "site"), ValidationError);
}

TEST_F(Storage, CheckpointRoundTrip) {
  Rng r(2);
  const auto seg = SegModel::init(SegArch{3, {8, 4}, true}, r);
  save_seg_model(seg, dir_ / "seg");
  const auto back = load_seg_model(dir_ / "seg");
  EXPECT_EQ(back.arch(), seg.arch());
  EXPECT_EQ(back.params(), seg.params());
  EXPECT_THROW(load_denoiser(dir_ / "seg"), ValidationError);

  const auto den = DenoiserModel::init(DenoiserArch{8, 8, 8, 24, 8}, r);
  save_denoiser(den, dir_ / "den");
  EXPECT_EQ(load_denoiser(dir_ / "den").params(), den.params());
  flip_byte(dir_ / "den.bin", 8);
  EXPECT_THROW(load_denoiser(dir_ / "den"), ValidationError);
}

TEST_F(Storage, PromptStoreRoundTrip) {
  const Rng base(3);
  const std::vector<PromptEmbedding> ps = {learnable_prompt(1, 16, base), fixed_prompt_baseline(2, 16, base)};
  write_prompt_store(ps, dir_);
  EXPECT_EQ(read_prompt_store(dir_), ps);
  auto j = to_json(ps[0]);
  j["scalars"][0] = j["scalars"][0].get<double>() + 1.0;
  EXPECT_THROW(prompt_from_json(j), ValidationError);
}

SiteStream tiny_stream() {
  StreamSpec spec = default_stream_spec(1);
  spec.samples_per_site = 8;
  spec.height = spec.width = 8;
  return make_stream(spec);
}

TEST(Audit, CleanSequentialRun) {
  const auto stream = tiny_stream();
  DataAccessLog log;
  StreamAccess access(stream, log);
  for (std::size_t r = 0; r < access.sequence_length(); ++r) {
    access.set_round(r);
    access.train(r, "segmentation");
    for (std::size_t j = 0; j < access.sequence_length(); ++j) access.test(j);
    for (std::size_t u = 0; u < access.unseen_count(); ++u) access.unseen_test(u);
  }
  EXPECT_TRUE(log.violations(access.sequence_ids(), false).empty());
  EXPECT_NO_THROW(log.verify(access.sequence_ids(), false));
}

TEST(Audit, RawReadAfterItsRound) {
  const auto stream = tiny_stream();
  DataAccessLog log;
  StreamAccess access(stream, log);
  access.set_round(0);
  access.train(0, "segmentation");
  access.set_round(2);
  access.train(0, "segmentation");
  const auto v = log.violations(access.sequence_ids(), false);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].find("round 3"), std::string::npos);
  EXPECT_THROW(log.verify(access.sequence_ids(), false), AuditError);
  EXPECT_TRUE(log.violations(access.sequence_ids(), true).empty());
}

TEST(Audit, ReadBeforeItsRoundFailsEvenOffline) {
  const auto stream = tiny_stream();
  DataAccessLog log;
  StreamAccess access(stream, log);
  access.set_round(0);
  access.train(1, "segmentation");
  EXPECT_EQ(log.violations(access.sequence_ids(), true).size(), 1u);
}

TEST(Audit, UnseenSiteNeverTrains) {
  const auto stream = tiny_stream();
  DataAccessLog log;
  StreamAccess access(stream, log);
  log.record(0, access.unseen_ids().at(0), AccessKind::kRawTrain, "segmentation");
  EXPECT_EQ(log.violations(access.sequence_ids(), true).size(), 1u);
  EXPECT_THROW(log.verify(access.sequence_ids(), true), AuditError);
}

TEST(Audit, ReplayAndEvalReadsAreNotTraining) {
  DataAccessLog log;
  log.record(3, 1, AccessKind::kReplay, "replay");
  log.record(3, 1, AccessKind::kRawEval, "test");
  EXPECT_TRUE(log.violations({1, 2, 3, 4}, false).empty());
  const auto j = log.to_json();
  EXPECT_EQ(j.size(), 2u);
}

TEST(Audit, BreachMapsToExitThree) {
  DataAccessLog log;
  log.record(1, 1, AccessKind::kRawTrain, "segmentation");
  std::ostringstream err;
  try {
    log.verify({1, 2}, false);
    FAIL();
  } catch (...) {
    EXPECT_EQ(exit_code_for(std::current_exception(), err), kExitAudit);
  }
  EXPECT_NE(err.str().find("audit"), std::string::npos);
}

TEST(ExitCodes, Mapping) {
  std::ostringstream err;
  auto code = [&](auto ex) { return exit_code_for(std::make_exception_ptr(ex), err); };
  EXPECT_EQ(code(NumericError("x")), kExitNumeric);
  EXPECT_EQ(code(ValidationError("x")), kExitInvalid);
  EXPECT_EQ(code(StructuralError("x")), kExitInvalid);
  EXPECT_EQ(code(std::runtime_error("x")), kExitFailure);
}

}  // namespace
}  // namespace sitecl
