#include "clarigen/corpus/embeddings.h"

#include <charconv>
#include <sstream>

#include "clarigen/error.h"

namespace clarigen::corpus {

EmbeddingTable random_embeddings(std::size_t vocab_size, std::size_t dim, numerics::Rng& rng) {
  if (dim == 0) throw ContractError("embedding dimension must be positive");
  EmbeddingTable t;
  t.matrix = numerics::Tensor({vocab_size, dim});
  for (double& v : t.matrix.values()) v = rng.uniform(-0.1, 0.1);
  for (double& v : t.matrix.row(kPad)) v = 0.0;
  return t;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                               std::size_t dim, numerics::Rng& rng) {
  EmbeddingTable table = random_embeddings(vocab.size(), dim, rng);
  const auto lines = read_lines(path);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    std::istringstream in(lines[ln]);
    std::string token;
    if (!(in >> token)) continue;
    std::vector<double> row;
    std::string field;
    while (in >> field) {
      double v = 0.0;
      auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || end != field.data() + field.size()) {
        throw ParseError(path.string() + ": malformed value \"" + field + "\"", ln + 1);
      }
      row.push_back(v);
    }
    if (row.size() != dim) {
      throw ParseError(path.string() + ": expected " + std::to_string(dim) + " values, got " +
                           std::to_string(row.size()),
                       ln + 1);
    }
    if (!vocab.contains(token)) continue;
    const int id = vocab.id(token);
    if (id == kPad) continue;
    std::copy(row.begin(), row.end(), table.matrix.row(static_cast<std::size_t>(id)).begin());
  }
  return table;
}

}  // namespace clarigen::corpus
