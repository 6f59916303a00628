#include "mkt/instance_lab.hpp"
#include "mkt/io.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <string>

using namespace mkt;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run mkt_cli(const std::string& args) {
  const std::string cmd = std::string(MKT_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t got = 0;
  while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "mkt_cli_test";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

bool has_line(const std::string& text, const std::string& line) {
  return ("\n" + text).find("\n" + line + "\n") != std::string::npos;
}

}  // namespace

TEST_CASE("usage errors exit with two") {
  CHECK(mkt_cli("").code == 2);
  CHECK(mkt_cli("solve-eg --bogus x").code == 2);
  CHECK(mkt_cli("reproduce no-such-thing").code == 2);
  CHECK(mkt_cli("--help").code == 0);
}

TEST_CASE("solving the two-agent linear example") {
  const std::string path = scratch("ex31.json");
  write_instance(path, gen_example_3_1());
  const Run r = mkt_cli("solve-eg " + path);
  CHECK(r.code == 0);
  CHECK(has_line(r.out, "utilities = [1, 0.5]"));
  CHECK(has_line(r.out, "kkt_pass = true"));
}

TEST_CASE("reports are byte identical across runs") {
  const std::string path = scratch("ex31.json");
  write_instance(path, gen_example_3_1());
  CHECK(mkt_cli("solve-eg " + path).out == mkt_cli("solve-eg " + path).out);
  const Run a = mkt_cli("reproduce theorem-3.3 --n 4 --seed 3");
  const Run b = mkt_cli("reproduce theorem-3.3 --n 4 --seed 3");
  CHECK(a.out == b.out);
}

TEST_CASE("identity construction reaches ratio n") {
  const Run r = mkt_cli("reproduce theorem-3.3 --n 5");
  CHECK(r.code == 0);
  CHECK(r.out.find("ratio = 5") != std::string::npos);
}

TEST_CASE("verifying trading post profiles") {
  const InstanceWithBids leo = gen_example_leo_family(0.3);
  const std::string inst = scratch("leo.json");
  const std::string bids = scratch("leo_bids.json");
  write_instance(inst, leo.instance);
  write_file(bids, matrix_to_text("bids", leo.bids));
  CHECK(mkt_cli("verify --kind tp-ne " + bids + " " + inst).code == 0);

  const std::string bad = scratch("bad_bids.json");
  write_file(bad, matrix_to_text("bids", Matrix::Constant(2, 2, 0.5)));
  const std::string ex = scratch("ex31_v.json");
  write_instance(ex, gen_example_3_1());
  CHECK(mkt_cli("verify --kind tp-ne " + bad + " " + ex).code == 1);
}

TEST_CASE("missing files and malformed input") {
  CHECK(mkt_cli("solve-eg " + scratch("absent.json")).code == 2);
  const std::string junk = scratch("junk.json");
  write_file(junk, "{ not json");
  CHECK(mkt_cli("solve-eg " + junk).code != 0);
}

TEST_CASE("report and csv land in the output file") {
  const std::string out = scratch("dyn.txt");
  std::filesystem::remove(out);
  std::filesystem::remove(out + ".csv");
  const std::string inst = scratch("id3.json");
  write_instance(inst, gen_identity_leontief(3));
  const Run r = mkt_cli("tp-dynamics " + inst + " --delta 1e-3 --out " + out);
  CHECK(r.code == 0);
  CHECK(read_file(out) == r.out);
  CHECK(read_file(out + ".csv").rfind("round,change,u1", 0) == 0);
}
