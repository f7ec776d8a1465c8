#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "shellkoop/io.hpp"
#include "support.hpp"

using namespace shellkoop;

namespace {

const Dataset& toy() {
  static const Dataset ds = testing::toy_dataset(12);
  return ds;
}

std::filesystem::path scratch_dir() {
  auto p = std::filesystem::temp_directory_path() / "shellkoop_test_io";
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("snapshot lines round-trip bit-exactly") {
  for (const auto& s : toy().snapshots) {
    const std::string line = snapshot_to_line(s);
    CHECK(line.find('\n') == std::string::npos);
    const GraphSnapshot back = snapshot_from_line(line, toy().shell);
    CHECK(back == s);
    CHECK(snapshot_to_line(back) == line);
  }
}

TEST_CASE("mask survives the round trip") {
  const GraphSnapshot masked = mask_features(toy().snapshots[3], 0.5, 9);
  const GraphSnapshot back = snapshot_from_line(snapshot_to_line(masked), toy().shell);
  CHECK(back.mask == masked.mask);
  CHECK(back.features == masked.features);
}

TEST_CASE("signed zero and extreme values survive") {
  GraphSnapshot s = toy().snapshots[0];
  s.features(0, 4) = -0.0;
  s.features(1, 4) = 1e-300;
  s.features(2, 4) = 0.1 + 0.2;
  const GraphSnapshot back = snapshot_from_line(snapshot_to_line(s), toy().shell);
  CHECK(std::signbit(back.features(0, 4)));
  CHECK(back.features(1, 4) == 1e-300);
  CHECK(back.features(2, 4) == 0.1 + 0.2);
}

TEST_CASE("malformed snapshot lines are rejected") {
  const std::string good = snapshot_to_line(toy().snapshots[0]);
  CHECK_THROWS(snapshot_from_line("", toy().shell));
  CHECK_THROWS(snapshot_from_line("{not json", toy().shell));
  CHECK_THROWS(snapshot_from_line(good.substr(0, good.size() / 2), toy().shell));
  CHECK_THROWS(snapshot_from_line(good, testing::toy_shell(4, 4)));
}

TEST_CASE("datasets round-trip through streams and files") {
  std::stringstream ss;
  write_dataset(toy(), ss);
  const std::string text = ss.str();
  const Dataset back = parse_dataset(ss);
  CHECK(back == toy());
  std::ostringstream again;
  write_dataset(back, again);
  CHECK(again.str() == text);

  const auto path = scratch_dir() / "nested" / "ds.jsonl";
  std::filesystem::remove_all(path.parent_path());
  save_dataset(toy(), path);
  CHECK(load_dataset(path) == toy());
  CHECK_THROWS(load_dataset(scratch_dir() / "missing.jsonl"));
}

TEST_CASE("dataset header is checked") {
  std::stringstream ss;
  write_dataset(toy(), ss);
  std::string text = ss.str();
  const auto first_nl = text.find('\n');
  std::string header = text.substr(0, first_nl);
  const std::string body = text.substr(first_nl);

  std::string extra = header;
  extra.insert(extra.size() - 1, ", \"bogus\": 1");
  std::istringstream a(extra + body);
  CHECK_THROWS(parse_dataset(a));

  std::string schema = header;
  schema.replace(schema.find("\"schema\": 1"), 11, "\"schema\": 2");
  std::istringstream b(schema + body);
  CHECK_THROWS(parse_dataset(b));

  std::istringstream empty("");
  CHECK_THROWS(parse_dataset(empty));

  // Dropping a middle snapshot breaks the time spacing.
  std::istringstream lines(text);
  std::string line, gapped;
  for (int i = 0; std::getline(lines, line); ++i) {
    if (i != 5) gapped += line + "\n";
  }
  std::istringstream c(gapped);
  CHECK_THROWS(parse_dataset(c));
}

TEST_CASE("atomic writes replace content") {
  const auto path = scratch_dir() / "atomic" / "out.txt";
  write_file_atomic(path, "first");
  write_file_atomic(path, "second");
  std::ifstream in(path);
  std::string got((std::istreambuf_iterator<char>(in)), {});
  CHECK(got == "second");
  for (const auto& e : std::filesystem::directory_iterator(path.parent_path())) {
    CHECK(e.path().filename() == "out.txt");
  }
}
