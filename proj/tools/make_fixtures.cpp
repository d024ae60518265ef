// Regenerates the committed test fixtures under tests/fixtures (or argv[1]).

#include <iostream>

#include <json.hpp>

#include "advx/corpus.hpp"
#include "advx/oracle.hpp"
#include "advx/png_io.hpp"

int main(int argc, char** argv) {
  using namespace advx;
  const std::filesystem::path root = argc > 1 ? argv[1] : "tests/fixtures";
  try {
    save_corpus(root / "corpus", synthetic_corpus(4, 7));

    // Wire golden pair: a 4x4 two-hue image and the mock's answer for it.
    RgbImage img(4, 4);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) img.at(x, y) = x < 2 ? Rgb{200, 40, 40} : Rgb{40, 60, 200};
    write_text(root / "wire" / "predict_request.json", predict_request_json(img) + "\n");
    write_text(root / "wire" / "predict_response.json", output_to_json(mock_predict(img)) + "\n");
    write_text(root / "wire" / "embed_request.json",
               nlohmann::json{{"tokens", {"a", "man", "is", "riding", "a", "horse"}}}.dump() + "\n");
  } catch (const std::exception& e) {
    std::cerr << "make_fixtures: " << e.what() << '\n';
    return 1;
  }
  std::cout << "fixtures written to " << root << '\n';
  return 0;
}
