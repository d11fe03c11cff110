#include "support/mock_corpus.hpp"

#include <random>
#include <stdexcept>

#include "rasr/rng.hpp"

namespace rasr::testing {

namespace {

constexpr int kLetters = 20;  // 'a'..'t'

std::string block_token(int first, int second) {
  std::string token(8, 'a');
  for (int i = 0; i < 4; ++i) token[static_cast<std::size_t>(i)] =
      static_cast<char>('a' + first);
  for (int i = 4; i < 8; ++i) token[static_cast<std::size_t>(i)] =
      static_cast<char>('a' + second);
  return token;
}

}  // namespace

MockCorpus make_mock_corpus(const MockCorpusConfig& cfg) {
  const int needed =
      cfg.opener_tokens + cfg.families * cfg.terms_per_family;
  if (needed > kLetters * kLetters) {
    throw std::invalid_argument("mock corpus needs too many distinct tokens");
  }

  std::vector<std::string> pool;
  pool.reserve(static_cast<std::size_t>(kLetters) * kLetters);
  for (int first = 0; first < kLetters; ++first) {
    for (int second = 0; second < kLetters; ++second) {
      pool.push_back(block_token(first, second));
    }
  }
  std::mt19937_64 gen(cfg.seed);
  rng::shuffle(pool, gen);

  MockCorpus corpus;
  std::size_t next = 0;
  for (int i = 0; i < cfg.opener_tokens; ++i) corpus.openers.push_back(pool[next++]);
  corpus.family_terms.resize(static_cast<std::size_t>(cfg.families));
  for (auto& terms : corpus.family_terms) {
    for (int i = 0; i < cfg.terms_per_family; ++i) terms.push_back(pool[next++]);
  }

  for (int family = 0; family < cfg.families; ++family) {
    const auto& terms = corpus.family_terms[static_cast<std::size_t>(family)];
    for (int talk = 0; talk < cfg.talks_per_family; ++talk) {
      const std::string talk_id =
          "talk-f" + std::to_string(family) + "-t" + std::to_string(talk);
      std::vector<UtteranceRecord> records;
      for (int utt = 0; utt < cfg.utterances_per_talk; ++utt) {
        std::string text;
        for (const auto& opener : corpus.openers) {
          if (!text.empty()) text += ' ';
          text += opener;
        }
        for (int j = 0; j < cfg.domain_tokens_per_utterance; ++j) {
          const int term_index =
              (utt * cfg.domain_tokens_per_utterance + j + talk) %
              cfg.terms_per_family;
          text += ' ';
          text += terms[static_cast<std::size_t>(term_index)];
        }
        UtteranceRecord rec;
        rec.talk_id = talk_id;
        rec.utterance_id = talk_id + "-u" + std::to_string(utt);
        rec.start_index = utt;
        rec.text = text;
        records.push_back(rec);

        EvalUtterance u;
        u.utterance_id = rec.utterance_id;
        u.talk_id = talk_id;
        u.audio_ref = "text:" + text;
        u.reference = text;
        corpus.dataset.push_back(u);
      }
      corpus.talks.push_back(build_talk(std::move(records)));
    }
  }
  return corpus;
}

VectorStore build_store_from_talks(const std::vector<TalkRecord>& talks,
                                   Embedder& embedder,
                                   const ChunkingConfig& chunking) {
  std::vector<Chunk> chunks;
  for (const auto& talk : talks) {
    std::vector<Chunk> talk_chunks = split_chunks(talk, chunking);
    chunks.insert(chunks.end(), std::make_move_iterator(talk_chunks.begin()),
                  std::make_move_iterator(talk_chunks.end()));
  }
  std::vector<std::string> texts;
  texts.reserve(chunks.size());
  for (const auto& c : chunks) texts.push_back(c.text);
  const std::vector<EmbeddingVector> vectors = embedder.embed_batch(texts);

  VectorStore store(embedder.dim());
  std::vector<StoreEntry> entries;
  entries.reserve(chunks.size());
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    entries.push_back(StoreEntry{chunks[i].chunk_id, chunks[i].talk_id,
                                 vectors[i], chunks[i].text});
  }
  store.upsert(std::move(entries));
  return store;
}

}  // namespace rasr::testing
