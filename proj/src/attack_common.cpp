#include "advx/attack.hpp"
#include "advx/metrics.hpp"

namespace advx {

CleanReference query_clean(OracleSession& session, EmbeddingProvider& embedder, const RgbImage& image) {
  CleanReference ref;
  ref.image = image;
  ref.output = session.predict(image).output;
  ref.output.validate();
  ref.explanation_embedding = embedder.embed(ref.output.explanation);
  return ref;
}

CandidateEval evaluate_candidate(OracleSession& session, EmbeddingProvider& embedder,
                                 const CleanReference& clean, const RgbImage& candidate,
                                 Scenario scenario, bool with_ssim) {
  OracleReply reply = session.predict(candidate);
  CandidateEval e;
  e.query_index = reply.query_index;
  e.output = std::move(reply.output);
  e.activity_changed = !equal_activity(clean.output.activity, e.output.activity);
  e.feasible = activity_predicate(scenario, e.activity_changed);
  e.q_text = explanation_similarity(clean.explanation_embedding, embedder.embed(e.output.explanation));
  e.q_image = with_ssim ? ssim(clean.image, candidate) : 0.0;
  return e;
}

}  // namespace advx
