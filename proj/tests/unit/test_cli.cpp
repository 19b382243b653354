#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dcf/image_io.hpp"
#include "dcf/pipeline.hpp"
#include "support.hpp"

using namespace dcf;

namespace {

namespace fs = std::filesystem;

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run dcf_cli(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + DCF_CLI_PATH + "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string bytes_of(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// A one-iteration checkpoint at 16x16, shared by the inpaint/eval cases.
fs::path tiny_checkpoint(const fs::path& dir) {
  const fs::path ckpt = dir / "tiny.ckpt";
  if (fs::exists(ckpt)) return ckpt;
  Run r = dcf_cli("train --set resolution=16 --set iterations=1 --set batch_size=1 --set synthetic_count=2 "
                  "--set ffc_blocks=1 --set checkpoint_path=" + ckpt.string() + " --log-every 0",
                  dir);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  return ckpt;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("maskgen center mask covers a quarter") {
  auto dir = dcf::test::scratch_dir("cli_maskgen");
  Run r = dcf_cli("maskgen --size 256 --mode center --out " + (dir / "m.png").string(), dir);
  REQUIRE(r.code == 0);
  Image8 img = read_image(dir / "m.png");
  std::size_t zeros = 0;
  for (auto v : img.pixels) zeros += v == 0;
  CHECK(static_cast<double>(zeros) / (256.0 * 256.0) == 0.25);
}

TEST_CASE("maskgen irregular is seed-deterministic and in band") {
  auto dir = dcf::test::scratch_dir("cli_maskgen_irregular");
  REQUIRE(dcf_cli("maskgen --size 64 --seed 5 --out " + (dir / "a.png").string(), dir).code == 0);
  REQUIRE(dcf_cli("maskgen --size 64 --seed 5 --out " + (dir / "b.png").string(), dir).code == 0);
  REQUIRE(dcf_cli("maskgen --size 64 --seed 6 --out " + (dir / "c.png").string(), dir).code == 0);
  CHECK(bytes_of(dir / "a.png") == bytes_of(dir / "b.png"));
  CHECK(bytes_of(dir / "a.png") != bytes_of(dir / "c.png"));
  const double cov = image_to_mask(read_image(dir / "a.png")).coverage();
  CHECK(cov >= 0.2);
  CHECK(cov <= 0.4);
}

TEST_CASE("gradcheck filtering exits 0") {
  auto dir = dcf::test::scratch_dir("cli_gradcheck");
  Run r = dcf_cli("gradcheck --module filtering", dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("0 failed") != std::string::npos);
}

TEST_CASE("inpaint with an all-known mask returns the input bit for bit") {
  auto dir = dcf::test::scratch_dir("cli_inpaint");
  const fs::path ckpt = tiny_checkpoint(dir);
  Dataset tex = synthetic_textures(1, 16, 9);
  write_image(dir / "in.png", tensor_to_image(tex.images[0]));
  write_image(dir / "mask.png", mask_to_image(MaskGrid(16, 16, 1)));
  Run r = dcf_cli("inpaint --checkpoint " + ckpt.string() + " --input " + (dir / "in.png").string() + " --mask " +
                      (dir / "mask.png").string() + " --output " + (dir / "out.png").string() + " --raw " +
                      (dir / "raw.png").string(),
                  dir);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(read_image(dir / "out.png").pixels == read_image(dir / "in.png").pixels);
  CHECK(fs::exists(dir / "raw.png"));
}

TEST_CASE("inpaint fills holes from the network") {
  auto dir = dcf::test::scratch_dir("cli_inpaint_holes");
  const fs::path ckpt = tiny_checkpoint(dir);
  write_image(dir / "in.png", tensor_to_image(synthetic_textures(1, 16, 9).images[0]));
  write_image(dir / "mask.png", mask_to_image(center_mask(16, 16)));
  Run r = dcf_cli("inpaint --checkpoint " + ckpt.string() + " --input " + (dir / "in.png").string() + " --mask " +
                      (dir / "mask.png").string() + " --output " + (dir / "out.png").string() + " --raw " +
                      (dir / "raw.png").string(),
                  dir);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  Image8 in = read_image(dir / "in.png"), out = read_image(dir / "out.png"), raw = read_image(dir / "raw.png");
  const std::size_t corner = 0, middle = (8 * 16 + 8) * 3;
  CHECK(out.pixels[corner] == in.pixels[corner]);
  CHECK(out.pixels[middle] == raw.pixels[middle]);
}

TEST_CASE("eval prints key=value records and the extractor note") {
  auto dir = dcf::test::scratch_dir("cli_eval");
  const fs::path ckpt = tiny_checkpoint(dir);
  fs::create_directories(dir / "data");
  Dataset tex = synthetic_textures(2, 16, 3);
  for (std::size_t i = 0; i < tex.size(); ++i)
    write_image(dir / "data" / ("img" + std::to_string(i) + ".png"), tensor_to_image(tex.images[i]));
  Run r = dcf_cli("eval --checkpoint " + ckpt.string() + " --data " + (dir / "data").string() + " --seeds 1,2", dir);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("psnr_hole=") != std::string::npos);
  CHECK(r.out.find("frechet=") != std::string::npos);
  CHECK(r.out.find("fixed random feature extractor") != std::string::npos);
}

TEST_CASE("exit codes") {
  auto dir = dcf::test::scratch_dir("cli_exit");
  Run usage = dcf_cli("maskgen --bogus", dir);
  CHECK(usage.code == 1);
  CHECK_FALSE(usage.err.empty());
  CHECK(dcf_cli("", dir).code == 1);
  CHECK(dcf_cli("maskgen --mode star --out " + (dir / "m.png").string(), dir).code == 1);
  CHECK(dcf_cli("train --set no_such_key=1", dir).code == 1);

  std::ofstream(dir / "junk.ckpt") << "garbage";
  std::ofstream(dir / "junk.png") << "garbage";
  Run data = dcf_cli("inpaint --checkpoint " + (dir / "junk.ckpt").string() + " --input x.png --mask y.png --output z.png",
                     dir);
  CHECK(data.code == 2);
  CHECK(data.err.find("junk.ckpt") != std::string::npos);
  const fs::path ckpt = tiny_checkpoint(dir);
  CHECK(dcf_cli("inpaint --checkpoint " + ckpt.string() + " --input " + (dir / "junk.png").string() +
                    " --mask y.png --output z.png",
                dir)
            .code == 2);
  std::ofstream(dir / "bad.cfg") << "resolution 64\n";
  CHECK(dcf_cli("train --config " + (dir / "bad.cfg").string(), dir).code == 2);
}

TEST_CASE("help lists commands, flags and config keys") {
  auto dir = dcf::test::scratch_dir("cli_help");
  Run top = dcf_cli("--help", dir);
  CHECK(top.code == 0);
  for (const char* cmd : {"train", "inpaint", "eval", "maskgen", "gradcheck", "selftest"})
    CHECK(top.out.find(cmd) != std::string::npos);
  Run train = dcf_cli("train --help", dir);
  CHECK(train.code == 0);
  for (const auto& [key, doc] : TrainConfig::documented_keys()) CHECK(train.out.find(key) != std::string::npos);
  CHECK(train.out.find("--resume") != std::string::npos);
  Run mask = dcf_cli("maskgen --help", dir);
  CHECK(mask.out.find("256") != std::string::npos);
}

}  // TEST_SUITE
