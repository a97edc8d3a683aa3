#include "clarigen/corpus/batch.h"

#include <algorithm>
#include <numeric>

#include "clarigen/error.h"

namespace clarigen::corpus {

EncodedTriple encode_triple(const Triple& t, const Vocabulary& vocab) {
  return {encode(t.context, vocab, kMaxContextLen, false),
          encode(t.question, vocab, kMaxQuestionLen, true),
          encode(t.answer, vocab, kMaxAnswerLen, true)};
}

std::vector<EncodedTriple> encode_all(const std::vector<Triple>& triples,
                                      const Vocabulary& vocab) {
  std::vector<EncodedTriple> out;
  out.reserve(triples.size());
  for (const Triple& t : triples) out.push_back(encode_triple(t, vocab));
  return out;
}

std::vector<int> Sequences::row(std::size_t b) const {
  return {ids.begin() + static_cast<long>(b * length),
          ids.begin() + static_cast<long>(b * length + static_cast<std::size_t>(lengths[b]))};
}

std::vector<int> Sequences::step(std::size_t t) const {
  std::vector<int> out(batch);
  for (std::size_t b = 0; b < batch; ++b) out[b] = at(b, t);
  return out;
}

std::vector<double> Sequences::step_mask(std::size_t t) const {
  std::vector<double> out(batch);
  for (std::size_t b = 0; b < batch; ++b) out[b] = mask[b * length + t];
  return out;
}

Sequences pad_sequences(const std::vector<std::vector<int>>& seqs) {
  Sequences s;
  s.batch = seqs.size();
  for (const auto& q : seqs) s.length = std::max(s.length, q.size());
  s.ids.assign(s.batch * s.length, kPad);
  s.mask.assign(s.batch * s.length, 0.0);
  for (std::size_t b = 0; b < s.batch; ++b) {
    s.lengths.push_back(static_cast<int>(seqs[b].size()));
    for (std::size_t t = 0; t < seqs[b].size(); ++t) {
      s.ids[b * s.length + t] = seqs[b][t];
      s.mask[b * s.length + t] = 1.0;
    }
  }
  return s;
}

Batch make_batch(const std::vector<EncodedTriple>& data, const std::vector<std::size_t>& index) {
  Batch batch;
  batch.index = index;
  std::vector<std::vector<int>> c, q, a;
  for (std::size_t i : index) {
    if (i >= data.size()) throw IndexError("make_batch: index out of range");
    c.push_back(data[i].context);
    q.push_back(data[i].question);
    a.push_back(data[i].answer);
  }
  batch.context = pad_sequences(c);
  batch.question = pad_sequences(q);
  batch.answer = pad_sequences(a);
  return batch;
}

void shuffle_indices(std::vector<std::size_t>& v, numerics::Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
}

std::vector<Batch> make_batches(const std::vector<EncodedTriple>& data, std::size_t batch_size,
                                numerics::Rng& rng) {
  if (batch_size == 0) throw ContractError("make_batches: batch_size must be at least 1");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle_indices(order, rng);
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    out.push_back(make_batch(data, {order.begin() + static_cast<long>(start),
                                    order.begin() + static_cast<long>(end)}));
  }
  return out;
}

}  // namespace clarigen::corpus
