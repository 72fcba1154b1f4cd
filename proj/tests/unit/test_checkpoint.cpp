#include <gtest/gtest.h>

#include "fontmanifold/checkpoint.hpp"
#include "fontmanifold/error.hpp"
#include "fontmanifold/io.hpp"
#include "fontmanifold/vae.hpp"
#include "support.hpp"

using namespace fm;
using namespace fm::vae;

namespace {

Checkpoint sample_checkpoint() {
  Rng rng(21);
  Checkpoint c;
  c.params = init_params(rng);
  c.epochs_completed = 3;
  c.seed = 99;
  c.learning_rate = 5e-4;
  return c;
}

}  // namespace

TEST(Checkpoint, SerializeRoundTrip) {
  const Checkpoint c = sample_checkpoint();
  const auto bytes = serialize(c);
  EXPECT_EQ(bytes[0], 'P');
  EXPECT_EQ(bytes[3], 'C');
  EXPECT_EQ(deserialize(bytes), c);
  EXPECT_EQ(serialize(deserialize(bytes)), bytes);
}

TEST(Checkpoint, FileRoundTripDecodesBitExact) {
  const Checkpoint c = sample_checkpoint();
  const auto path = test::scratch_dir("checkpoint") / "m.pfmc";
  save_checkpoint(path, c);
  const Checkpoint back = load_checkpoint(path);
  Rng rng(5);
  for (int i = 0; i < 10; ++i) {
    LatentVector z;
    for (double& v : z) v = rng.normal();
    EXPECT_EQ(decode(back.params, z), decode(c.params, z));
  }
}

TEST(Checkpoint, CorruptionDetected) {
  auto bytes = serialize(sample_checkpoint());
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize(bad_magic), Error);
  bytes.resize(bytes.size() - 8);
  EXPECT_THROW(deserialize(bytes), Error);
  EXPECT_THROW(deserialize(std::vector<std::uint8_t>{}), Error);
}

TEST(Checkpoint, MissingFileIsIoError) {
  try {
    load_checkpoint(test::scratch_dir("checkpoint-missing") / "nope.pfmc");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Io);
  }
}
