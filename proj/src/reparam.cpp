#include "lar/reparam.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "lar/version.hpp"
#include "parallel.hpp"

namespace lar {

namespace {
using nlohmann::json;
constexpr std::uint32_t kNoChild = 0xFFFFFFFFu;
}  // namespace

// Aho-Corasick over matcher-local word ids. Unknown words reset to the root,
// which is correct here: no segment can span a token outside the vocabulary's
// word alphabet.
struct SegmentMatcher::Impl {
  LatentVocabulary vocab;
  std::unordered_map<std::string_view, std::uint32_t> word_ids;  // views into vocab storage

  struct Node {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;  // word id -> node, sorted
    std::uint32_t fail = 0;
    std::uint32_t dict = 0;  // nearest fail-chain state ending a segment (0 = none)
    std::int32_t seg = -1;   // rank of the segment ending exactly here
    std::uint32_t depth = 0;
  };
  std::vector<Node> nodes;
  std::vector<std::uint32_t> attempt_order;  // ranks by (length desc, rank asc)

  explicit Impl(const LatentVocabulary& v) : vocab(v) {
    nodes.emplace_back();
    for (const auto& action : vocab.actions) {
      std::uint32_t cur = 0;
      for (const auto& w : action.words) {
        auto [it, inserted] = word_ids.emplace(w, static_cast<std::uint32_t>(word_ids.size()));
        const std::uint32_t wid = it->second;
        std::uint32_t next = kNoChild;
        for (const auto& [ew, en] : nodes[cur].edges)
          if (ew == wid) {
            next = en;
            break;
          }
        if (next == kNoChild) {
          next = static_cast<std::uint32_t>(nodes.size());
          nodes[cur].edges.emplace_back(wid, next);
          nodes.emplace_back();
          nodes[next].depth = nodes[cur].depth + 1;
        }
        cur = next;
      }
      nodes[cur].seg = static_cast<std::int32_t>(action.rank);
    }
    for (auto& n : nodes) std::sort(n.edges.begin(), n.edges.end());

    // BFS failure links.
    std::vector<std::uint32_t> queue;
    queue.reserve(nodes.size());
    for (const auto& [w, c] : nodes[0].edges) {
      nodes[c].fail = 0;
      queue.push_back(c);
    }
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      const std::uint32_t u = queue[qi];
      const std::uint32_t fu = nodes[u].fail;
      nodes[u].dict = nodes[fu].seg >= 0 ? fu : nodes[fu].dict;
      for (const auto& [w, v] : nodes[u].edges) {
        std::uint32_t f = fu;
        std::uint32_t t = child(f, w);
        while (f != 0 && t == kNoChild) {
          f = nodes[f].fail;
          t = child(f, w);
        }
        nodes[v].fail = (t == kNoChild || t == v) ? 0 : t;
        queue.push_back(v);
      }
    }

    attempt_order.resize(vocab.actions.size());
    for (std::uint32_t i = 0; i < attempt_order.size(); ++i) attempt_order[i] = i;
    std::sort(attempt_order.begin(), attempt_order.end(), [&](std::uint32_t a, std::uint32_t b) {
      const std::size_t la = vocab.actions[a].words.size(), lb = vocab.actions[b].words.size();
      if (la != lb) return la > lb;
      return a < b;
    });
  }

  std::uint32_t child(std::uint32_t node, std::uint32_t wid) const {
    const auto& edges = nodes[node].edges;
    auto it = std::lower_bound(edges.begin(), edges.end(),
                               std::make_pair(wid, std::uint32_t{0}));
    return (it != edges.end() && it->first == wid) ? it->second : kNoChild;
  }

  std::uint32_t advance(std::uint32_t state, std::uint32_t wid) const {
    std::uint32_t t = child(state, wid);
    while (state != 0 && t == kNoChild) {
      state = nodes[state].fail;
      t = child(state, wid);
    }
    return t == kNoChild ? 0 : t;
  }

  // Collects match start positions per rank within one step's token stream,
  // restarting at every sentence boundary.
  void scan(const std::vector<Token>& tokens,
            std::vector<std::vector<std::uint32_t>>& starts_by_rank) const {
    std::uint32_t state = 0;
    std::uint32_t prev_sentence = 0;
    for (std::uint32_t pos = 0; pos < tokens.size(); ++pos) {
      if (pos == 0 || tokens[pos].sentence_index != prev_sentence) {
        state = 0;
        prev_sentence = tokens[pos].sentence_index;
      }
      const auto it = word_ids.find(std::string_view(tokens[pos].text));
      if (it == word_ids.end()) {
        state = 0;
        continue;
      }
      state = advance(state, it->second);
      for (std::uint32_t u = nodes[state].seg >= 0 ? state : nodes[state].dict; u != 0;
           u = nodes[u].dict) {
        starts_by_rank[static_cast<std::size_t>(nodes[u].seg)].push_back(
            pos + 1 - nodes[u].depth);
      }
    }
  }
};

SegmentMatcher::SegmentMatcher(const LatentVocabulary& vocab)
    : impl_(std::make_unique<Impl>(vocab)) {}
SegmentMatcher::~SegmentMatcher() = default;
SegmentMatcher::SegmentMatcher(SegmentMatcher&&) noexcept = default;
SegmentMatcher& SegmentMatcher::operator=(SegmentMatcher&&) noexcept = default;

const LatentVocabulary& SegmentMatcher::vocab() const { return impl_->vocab; }

std::vector<SegmentOccurrence> SegmentMatcher::find_occurrences(
    const std::vector<Token>& tokens) const {
  std::vector<std::vector<std::uint32_t>> starts(impl_->vocab.actions.size());
  impl_->scan(tokens, starts);
  std::vector<SegmentOccurrence> out;
  for (std::uint32_t rank = 0; rank < starts.size(); ++rank)
    for (const std::uint32_t s : starts[rank]) out.push_back({rank, s});
  std::sort(out.begin(), out.end(), [](const SegmentOccurrence& a, const SegmentOccurrence& b) {
    return a.token_start != b.token_start ? a.token_start < b.token_start
                                          : a.action_rank < b.action_rank;
  });
  return out;
}

DualPair SegmentMatcher::compress(const Trajectory& trajectory) const {
  DualPair pair;
  pair.original = trajectory;
  pair.reparameterized.id = trajectory.id;
  pair.reparameterized.steps.reserve(trajectory.steps.size());

  std::vector<std::vector<std::uint32_t>> starts(impl_->vocab.actions.size());
  std::vector<std::uint8_t> consumed;
  std::vector<SpanReplacement> step_replacements;

  for (std::uint32_t si = 0; si < trajectory.steps.size(); ++si) {
    const auto& tokens = trajectory.steps[si].action_tokens;
    for (auto& v : starts) v.clear();
    impl_->scan(tokens, starts);

    consumed.assign(tokens.size(), 0);
    step_replacements.clear();
    // Longest segment first (ties: rank); occurrences left to right; skip
    // anything overlapping an already consumed span. Steps are independent,
    // so per-step processing equals a global per-segment pass.
    for (const std::uint32_t rank : impl_->attempt_order) {
      const std::uint32_t len =
          static_cast<std::uint32_t>(impl_->vocab.actions[rank].words.size());
      for (const std::uint32_t start : starts[rank]) {
        bool free = true;
        for (std::uint32_t p = start; p < start + len; ++p)
          if (consumed[p]) {
            free = false;
            break;
          }
        if (!free) continue;
        for (std::uint32_t p = start; p < start + len; ++p) consumed[p] = 1;
        step_replacements.push_back({si, start, len, rank});
      }
    }
    std::sort(step_replacements.begin(), step_replacements.end(),
              [](const SpanReplacement& a, const SpanReplacement& b) {
                return a.token_start < b.token_start;
              });

    Step rep_step;
    rep_step.observation = trajectory.steps[si].observation;
    std::size_t ri = 0;
    for (std::uint32_t pos = 0; pos < tokens.size();) {
      if (ri < step_replacements.size() && step_replacements[ri].token_start == pos) {
        const auto& r = step_replacements[ri];
        rep_step.action_tokens.push_back(
            Token{impl_->vocab.actions[r.action_rank].symbol, tokens[pos].sentence_index});
        pos += r.token_len;
        ++ri;
      } else {
        rep_step.action_tokens.push_back(tokens[pos]);
        ++pos;
      }
    }
    std::string joined;
    for (std::size_t i = 0; i < rep_step.action_tokens.size(); ++i) {
      if (i) joined += ' ';
      joined += rep_step.action_tokens[i].text;
    }
    rep_step.action = std::move(joined);
    pair.reparameterized.steps.push_back(std::move(rep_step));
    pair.replacements.insert(pair.replacements.end(), step_replacements.begin(),
                             step_replacements.end());
  }
  return pair;
}

std::vector<DualPair> compress_corpus(const Corpus& corpus, const LatentVocabulary& vocab,
                                      bool allow_cross_corpus, unsigned threads) {
  if (!allow_cross_corpus && vocab.corpus_digest != corpus.digest)
    throw ValidationError(
        "vocabulary was mined from a different corpus (digest " + vocab.corpus_digest +
        " vs " + corpus.digest + "); pass --allow-cross-corpus to apply it anyway");
  const SegmentMatcher matcher(vocab);
  std::vector<DualPair> pairs(corpus.trajectories.size());
  detail::parallel_shards(corpus.trajectories.size(), threads,
                          [&](unsigned, std::size_t begin, std::size_t end) {
                            for (std::size_t i = begin; i < end; ++i)
                              pairs[i] = matcher.compress(corpus.trajectories[i]);
                          });
  return pairs;
}

Trajectory expand(const Trajectory& reparameterized, const LatentVocabulary& vocab) {
  Trajectory out;
  out.id = reparameterized.id;
  out.steps.reserve(reparameterized.steps.size());
  for (std::size_t si = 0; si < reparameterized.steps.size(); ++si) {
    const Step& step = reparameterized.steps[si];
    Step expanded;
    expanded.observation = step.observation;
    for (std::size_t ti = 0; ti < step.action_tokens.size(); ++ti) {
      const Token& tok = step.action_tokens[ti];
      const auto rank = latent_rank(tok.text);
      if (!rank) {
        expanded.action_tokens.push_back(tok);
        continue;
      }
      if (*rank >= vocab.actions.size())
        throw ValidationError("unknown latent symbol " + tok.text + " at step " +
                              std::to_string(si) + ", token " + std::to_string(ti));
      for (const auto& w : vocab.actions[*rank].words)
        expanded.action_tokens.push_back(Token{w, tok.sentence_index});
    }
    std::string joined;
    for (std::size_t i = 0; i < expanded.action_tokens.size(); ++i) {
      if (i) joined += ' ';
      joined += expanded.action_tokens[i].text;
    }
    expanded.action = std::move(joined);
    out.steps.push_back(std::move(expanded));
  }
  return out;
}

Trajectory expand(const DualPair& pair, const LatentVocabulary& vocab) {
  return expand(pair.reparameterized, vocab);
}

bool verify_pair(const DualPair& pair, const LatentVocabulary& vocab) {
  const Trajectory expanded = expand(pair.reparameterized, vocab);
  if (expanded.id != pair.original.id) return false;
  if (expanded.steps.size() != pair.original.steps.size()) return false;
  for (std::size_t si = 0; si < expanded.steps.size(); ++si) {
    const Step& a = expanded.steps[si];
    const Step& b = pair.original.steps[si];
    if (a.observation != b.observation) return false;
    if (a.action_tokens != b.action_tokens) return false;
  }
  return true;
}

std::uint64_t latent_horizon(const DualPair& pair) {
  return effective_horizon(pair.reparameterized);
}

double reparameterization_rate(const std::vector<DualPair>& pairs) {
  if (pairs.empty()) throw ValidationError("reparameterization rate over an empty pair set");
  std::uint64_t h_lat = 0, h_eff = 0;
  for (const auto& p : pairs) {
    h_lat += latent_horizon(p);
    h_eff += effective_horizon(p.original);
  }
  if (h_eff == 0)
    throw ValidationError("reparameterization rate over trajectories with no action tokens");
  return static_cast<double>(h_lat) / static_cast<double>(h_eff);
}

namespace {

json step_to_json(const Step& step, bool with_observation) {
  json tokens = json::array();
  json sentences = json::array();
  for (const auto& t : step.action_tokens) {
    tokens.push_back(t.text);
    sentences.push_back(t.sentence_index);
  }
  json rec = {{"tokens", std::move(tokens)}, {"sentences", std::move(sentences)}};
  if (with_observation) rec["observation"] = step.observation;
  return rec;
}

Step step_from_json(const json& rec, std::size_t line_no) {
  if (!rec.is_object() || !rec.contains("tokens") || !rec.contains("sentences") ||
      !rec["tokens"].is_array() || !rec["sentences"].is_array() ||
      rec["tokens"].size() != rec["sentences"].size())
    throw ParseError("malformed step record", line_no);
  Step step;
  if (rec.contains("observation")) {
    if (!rec["observation"].is_string()) throw ParseError("malformed step record", line_no);
    step.observation = rec["observation"].get<std::string>();
  }
  std::uint32_t prev = 0;
  for (std::size_t i = 0; i < rec["tokens"].size(); ++i) {
    const auto& tj = rec["tokens"][i];
    const auto& sj = rec["sentences"][i];
    if (!tj.is_string() || !sj.is_number_unsigned())
      throw ParseError("malformed step tokens", line_no);
    const auto idx = sj.get<std::uint32_t>();
    if (i == 0 ? idx != 0 : (idx < prev || idx > prev + 1))
      throw ParseError("sentence indices must be contiguous from 0", line_no);
    prev = idx;
    step.action_tokens.push_back(Token{tj.get<std::string>(), idx});
  }
  std::string joined;
  for (std::size_t i = 0; i < step.action_tokens.size(); ++i) {
    if (i) joined += ' ';
    joined += step.action_tokens[i].text;
  }
  step.action = std::move(joined);
  return step;
}

}  // namespace

void save_pairs(const std::vector<DualPair>& pairs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write pairs file: " + path.string());
  json header = {{"format", "lar-pairs"}, {"version", kPairsFileVersion}, {"count", pairs.size()}};
  out << header.dump() << '\n';
  for (const auto& p : pairs) {
    json orig = json::array();
    for (const auto& s : p.original.steps) orig.push_back(step_to_json(s, true));
    json rep = json::array();
    for (const auto& s : p.reparameterized.steps) rep.push_back(step_to_json(s, false));
    json repl = json::array();
    for (const auto& r : p.replacements)
      repl.push_back({{"step", r.step},
                      {"start", r.token_start},
                      {"len", r.token_len},
                      {"rank", r.action_rank}});
    json rec = {{"id", p.original.id},
                {"original_steps", std::move(orig)},
                {"reparameterized_steps", std::move(rep)},
                {"replacements", std::move(repl)}};
    out << rec.dump() << '\n';
  }
  if (!out) throw IoError("write error on pairs file: " + path.string());
}

std::vector<DualPair> load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open pairs file: " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::vector<DualPair> pairs;
  std::unordered_set<std::string> ids;
  bool have_header = false;
  json header;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) throw ParseError("corrupted pair record", line_no);
    if (!have_header) {
      if (rec.value("format", "") != "lar-pairs")
        throw ParseError("not a pairs file header", line_no);
      if (rec.value("version", -1) != kPairsFileVersion)
        throw ValidationError("unsupported pairs schema version in " + path.string());
      have_header = true;
      header = std::move(rec);
      continue;
    }
    DualPair p;
    if (!rec.contains("id") || !rec["id"].is_string() || !rec.contains("original_steps") ||
        !rec.contains("reparameterized_steps") || !rec.contains("replacements"))
      throw ParseError("pair record missing fields", line_no);
    p.original.id = p.reparameterized.id = rec["id"].get<std::string>();
    if (p.original.id.empty() || !ids.insert(p.original.id).second)
      throw ParseError("missing or duplicate pair id", line_no);
    for (const auto& s : rec["original_steps"]) p.original.steps.push_back(step_from_json(s, line_no));
    for (const auto& s : rec["reparameterized_steps"]) {
      Step step = step_from_json(s, line_no);
      // Observation lives once, on the original side.
      if (p.reparameterized.steps.size() < p.original.steps.size())
        step.observation = p.original.steps[p.reparameterized.steps.size()].observation;
      p.reparameterized.steps.push_back(std::move(step));
    }
    if (p.original.steps.size() != p.reparameterized.steps.size())
      throw ParseError("pair step counts differ", line_no);
    std::uint64_t prev_key = 0;
    bool first = true;
    for (const auto& r : rec["replacements"]) {
      if (!r.is_object() || !r.contains("step") || !r.contains("start") || !r.contains("len") ||
          !r.contains("rank"))
        throw ParseError("malformed replacement record", line_no);
      SpanReplacement sr;
      sr.step = r["step"].get<std::uint32_t>();
      sr.token_start = r["start"].get<std::uint32_t>();
      sr.token_len = r["len"].get<std::uint32_t>();
      sr.action_rank = r["rank"].get<std::uint32_t>();
      if (sr.step >= p.original.steps.size() || sr.token_len == 0 ||
          sr.token_start + sr.token_len > p.original.steps[sr.step].action_tokens.size())
        throw ParseError("replacement span out of bounds", line_no);
      const std::uint64_t key = (std::uint64_t{sr.step} << 32) | sr.token_start;
      if (!first && key <= prev_key)
        throw ParseError("replacements not ordered by (step, start)", line_no);
      prev_key = key;
      first = false;
      p.replacements.push_back(sr);
    }
    pairs.push_back(std::move(p));
  }
  if (in.bad()) throw IoError("read error on pairs file: " + path.string());
  if (!have_header) throw ParseError("missing pairs header", 1);
  if (header.contains("count") && header["count"].is_number_unsigned() &&
      header["count"].get<std::uint64_t>() != pairs.size())
    throw ValidationError("pair record count does not match header in " + path.string());
  return pairs;
}

}  // namespace lar
