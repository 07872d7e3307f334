#include "globalbias/globalbias.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <string>
#include <vector>

#include "common/error.hpp"
#include "genharness/prompt.hpp"
#include "pipeline/config.hpp"
#include "pipeline/manifest.hpp"
#include "pipeline/stages.hpp"
#include "profileanalysis/profileanalysis.hpp"
#include "scoring/perplexity.hpp"

struct gb_context {
  std::string config_path;
  gbias::pipeline::Overrides overrides;
  gbias::pipeline::Config config;
};

namespace {

thread_local std::string last_error;

gb_status to_status(gbias::ErrorCode c) {
  switch (c) {
    case gbias::ErrorCode::InvalidArgument: return GB_ERR_INVALID_ARGUMENT;
    case gbias::ErrorCode::Io: return GB_ERR_IO;
    case gbias::ErrorCode::Parse: return GB_ERR_PARSE;
    case gbias::ErrorCode::Validation: return GB_ERR_VALIDATION;
    case gbias::ErrorCode::MissingArtifact: return GB_ERR_MISSING_ARTIFACT;
    case gbias::ErrorCode::Backend: return GB_ERR_BACKEND;
    case gbias::ErrorCode::Internal: return GB_ERR_INTERNAL;
  }
  return GB_ERR_INTERNAL;
}

// Every entry point funnels through here so no exception crosses the C boundary.
template <class F>
gb_status guarded(F&& f) {
  last_error.clear();
  try {
    f();
    return GB_OK;
  } catch (const gbias::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return GB_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return GB_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return GB_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require_arg(bool ok, const char* what) {
  if (!ok) gbias::fail(gbias::ErrorCode::InvalidArgument, what);
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  gbias::fail(gbias::ErrorCode::InvalidArgument, "expected true or false, got '" + v + "'");
}

}  // namespace

extern "C" {

const char* gb_version(void) { return GLOBALBIAS_VERSION; }

const char* gb_status_name(gb_status status) {
  switch (status) {
    case GB_OK: return "ok";
    case GB_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case GB_ERR_IO: return "io";
    case GB_ERR_PARSE: return "parse";
    case GB_ERR_VALIDATION: return "validation";
    case GB_ERR_MISSING_ARTIFACT: return "missing_artifact";
    case GB_ERR_BACKEND: return "backend";
    case GB_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* gb_last_error(void) { return last_error.c_str(); }

void gb_string_free(char* s) { std::free(s); }

gb_status gb_context_create(const char* config_path, gb_context** out) {
  if (out) *out = nullptr;
  return guarded([&] {
    require_arg(config_path && out, "gb_context_create: null argument");
    auto ctx = std::make_unique<gb_context>();
    ctx->config_path = config_path;
    ctx->config = gbias::pipeline::load_config(ctx->config_path, ctx->overrides);
    *out = ctx.release();
  });
}

void gb_context_destroy(gb_context* ctx) { delete ctx; }

gb_status gb_context_set_override(gb_context* ctx, const char* key, const char* value) {
  return guarded([&] {
    require_arg(ctx && key && value, "gb_context_set_override: null argument");
    auto ov = ctx->overrides;
    const std::string k = key, v = value;
    try {
      if (k == "seed") {
        require_arg(!v.empty() && v.find_first_not_of("0123456789") == std::string::npos, "seed must be a non-negative integer");
        ov.seed = std::stoull(v);
      } else if (k == "backend") ov.backend = v;
      else if (k == "alpha") {
        std::size_t used = 0;
        ov.alpha = std::stod(v, &used);
        require_arg(used == v.size(), "alpha must be a number");
      } else if (k == "apx_direction") ov.apx_direction = v;
      else if (k == "run_dir") ov.run_dir = v;
      else if (k == "format") ov.format = v;
      else if (k == "dump_centroids") ov.dump_centroids = parse_bool(v);
      else if (k == "normalize") ov.normalize = parse_bool(v);
      else gbias::fail(gbias::ErrorCode::InvalidArgument, "unknown override '" + k + "'");
    } catch (const std::logic_error&) {
      gbias::fail(gbias::ErrorCode::InvalidArgument, "bad value '" + v + "' for override '" + k + "'");
    }
    auto cfg = gbias::pipeline::load_config(ctx->config_path, ov);
    ctx->overrides = std::move(ov);
    ctx->config = std::move(cfg);
  });
}

const char* gb_context_run_id(const gb_context* ctx) { return ctx ? ctx->config.run_id.c_str() : ""; }

size_t gb_stage_count(void) { return gbias::pipeline::stage_names().size(); }

const char* gb_stage_name(size_t index) {
  const auto& s = gbias::pipeline::stage_names();
  return index < s.size() ? s[index].c_str() : nullptr;
}

gb_status gb_context_run_stage(gb_context* ctx, const char* stage, char** summary_json) {
  if (summary_json) *summary_json = nullptr;
  return guarded([&] {
    require_arg(ctx && stage, "gb_context_run_stage: null argument");
    auto r = gbias::pipeline::run_stage(stage, ctx->config);
    if (summary_json) {
      nlohmann::ordered_json j;
      j["stage"] = r.stage;
      j["run_id"] = ctx->config.run_id;
      j["counts"] = r.counts;
      j["artifacts"] = r.artifacts;
      j["warnings"] = r.warnings;
      *summary_json = dup_string(j.dump(2));
    }
  });
}

gb_status gb_ppl(const double* logprobs, size_t n, double* out) {
  return guarded([&] {
    require_arg(out && (logprobs || n == 0), "gb_ppl: null argument");
    *out = gbias::scoring::ppl_from_logprobs({logprobs, n});
  });
}

gb_status gb_pseudo_ppl(const double* masked_logprobs, size_t n, double* out) {
  return guarded([&] {
    require_arg(out && (masked_logprobs || n == 0), "gb_pseudo_ppl: null argument");
    *out = gbias::scoring::pseudo_ppl_from_masked_logprobs({masked_logprobs, n});
  });
}

gb_status gb_jsd(const double* p, const double* q, size_t n, double* out) {
  return guarded([&] {
    require_arg(out && p && q && n > 0, "gb_jsd: null argument or empty support");
    gbias::profileanalysis::Distribution dp, dq;
    for (size_t i = 0; i < n; ++i) {
      auto key = std::to_string(i);
      if (p[i] != 0.0) dp[key] = p[i];
      if (q[i] != 0.0) dq[key] = q[i];
      if (p[i] < 0.0 || q[i] < 0.0) gbias::fail(gbias::ErrorCode::InvalidArgument, "gb_jsd: negative weight");
    }
    *out = gbias::profileanalysis::jsd(dp, dq);
  });
}

gb_status gb_build_prompt(const char* const* names, size_t n, char** out) {
  if (out) *out = nullptr;
  return guarded([&] {
    require_arg(out && (names || n == 0), "gb_build_prompt: null argument");
    std::vector<std::string> v;
    for (size_t i = 0; i < n; ++i) {
      require_arg(names[i] != nullptr, "gb_build_prompt: null name");
      v.emplace_back(names[i]);
    }
    *out = dup_string(gbias::genharness::build_prompt(v));
  });
}

}  // extern "C"
