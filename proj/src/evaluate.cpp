// SPDX-License-Identifier: Apache-2.0
#include "vpiqa/evaluate.hpp"

#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "vpiqa/error.hpp"
#include "vpiqa/train.hpp"

namespace vpiqa {

EvalResult evaluate(const VisualPrompt& prompt, std::span<const Sample> samples, const FrozenScorer& scorer,
                    const EvalOptions& options) {
  if (samples.empty()) throw InputError("evaluation set is empty");
  const auto scores = predict(prompt, samples, scorer, options.workers);

  EvalResult out;
  auto& r = out.report;
  r.n = samples.size();
  r.prompt_checkpoint = options.prompt_checkpoint.empty() ? prompt.id() : options.prompt_checkpoint;
  r.dataset_id = options.dataset_id;
  r.backend = scorer.config().name;

  std::vector<double> targets(samples.size());
  out.predictions.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    targets[i] = samples[i].target;
    out.predictions.push_back({samples[i].id, samples[i].target, scores[i]});
  }
  r.mse = mse_loss(scores, targets);
  try {
    r.srcc = srcc(scores, targets);
    r.plcc = plcc(scores, targets);
    if (options.logistic_plcc) r.plcc_logistic = plcc_with_logistic(scores, targets);
  } catch (const UndefinedCorrelation& e) {
    r.srcc.reset();
    r.plcc.reset();
    r.error = e.what();
  } catch (const InputError& e) {
    r.srcc.reset();
    r.plcc.reset();
    r.error = e.what();
  }
  return out;
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

}  // namespace

std::string predictions_csv(std::span<const SamplePrediction> predictions) {
  std::string out = "path,y,s\n";
  char buf[96];
  for (const auto& p : predictions) {
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", p.target, p.score);
    out += csv_field(p.id) + buf;
  }
  return out;
}

std::string report_csv(const EvalReport& r) {
  std::string out = "n,srcc,plcc,plcc_logistic,mse,dataset,backend,checkpoint,error\n";
  out += std::to_string(r.n) + ',' + opt_num(r.srcc) + ',' + opt_num(r.plcc) + ',' +
         (r.plcc_logistic ? num(r.plcc_logistic->value) : std::string()) + ',' + num(r.mse) + ',' +
         csv_field(r.dataset_id) + ',' + csv_field(r.backend) + ',' + csv_field(r.prompt_checkpoint) + ',' +
         csv_field(r.error) + '\n';
  return out;
}

std::string report_json_line(const EvalReport& r) {
  nlohmann::json j;
  j["n"] = r.n;
  j["srcc"] = r.srcc ? nlohmann::json(*r.srcc) : nlohmann::json(nullptr);
  j["plcc"] = r.plcc ? nlohmann::json(*r.plcc) : nlohmann::json(nullptr);
  if (r.plcc_logistic) {
    j["plcc_logistic"] = r.plcc_logistic->value;
    j["plcc_logistic_fitted"] = r.plcc_logistic->fitted;
  }
  j["mse"] = r.mse;
  j["dataset"] = r.dataset_id;
  j["backend"] = r.backend;
  j["checkpoint"] = r.prompt_checkpoint;
  if (!r.error.empty()) j["error"] = r.error;
  return j.dump() + "\n";
}

std::string report_table(const EvalReport& r) {
  std::ostringstream out;
  out << "dataset     " << (r.dataset_id.empty() ? "-" : r.dataset_id) << '\n'
      << "backend     " << r.backend << '\n'
      << "checkpoint  " << r.prompt_checkpoint << '\n'
      << "samples     " << r.n << '\n'
      << "SRCC        " << (r.srcc ? num(*r.srcc) : "undefined") << '\n'
      << "PLCC        " << (r.plcc ? num(*r.plcc) : "undefined") << '\n';
  if (r.plcc_logistic) {
    out << "PLCC (4PL)  " << num(r.plcc_logistic->value) << (r.plcc_logistic->fitted ? "" : "  [fit failed, raw]")
        << '\n';
  }
  out << "MSE         " << num(r.mse) << '\n';
  if (!r.error.empty()) out << "error       " << r.error << '\n';
  return out.str();
}

}  // namespace vpiqa
