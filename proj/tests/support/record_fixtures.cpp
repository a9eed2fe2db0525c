// Regenerates tests/fixtures/e2e/fixtures.jsonl from the synthetic responder.
#include <filesystem>
#include <fstream>
#include <iostream>

#include "e2e.hpp"
#include "mbt/dataset.hpp"
#include "mbt/pipeline.hpp"
#include "synthetic.hpp"

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  const fs::path out = argc > 1 ? fs::path(argv[1]) : mbt::testing::e2e_dir() / "fixtures.jsonl";
  const auto raw = mbt::testing::e2e_dir() / "hotpot_dev.json";
  std::ifstream in(raw);
  auto corpus = mbt::load_dataset(mbt::Source::hotpotqa, in, mbt::Split::validation);

  auto config = mbt::load_config(mbt::testing::e2e_dir() / "config.json");
  auto recorder = std::make_shared<mbt::testing::RecordingTransport>(
      std::make_shared<mbt::testing::SyntheticResponder>(corpus));
  mbt::Gateway gateway(recorder, mbt::gateway_options(config));
  const auto work = fs::temp_directory_path() / "mbt-record-fixtures";
  fs::remove_all(work);
  mbt::testing::run_e2e(config, gateway, mbt::load_templates(config), raw, work);
  fs::remove_all(work);
  const auto fixtures = recorder->fixtures();
  fixtures.save(out);
  std::cout << "recorded " << fixtures.size() << " fixtures to " << out.string() << '\n';
}
