#include "seqrec.h"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "seqrec/ann.hpp"
#include "seqrec/config.hpp"
#include "seqrec/embedding_table.hpp"
#include "seqrec/error.hpp"
#include "seqrec/lstm.hpp"
#include "seqrec/pipeline.hpp"
#include "seqrec/vecmath.hpp"

namespace {

thread_local std::string g_last_error;

seqrec_status to_status(seqrec::ErrorCode code) {
    return static_cast<seqrec_status>(static_cast<int>(code));
}

seqrec_status set_error(seqrec_status status, const std::string& message) {
    g_last_error = message;
    return status;
}

// Runs fn, translating exceptions into status codes.
template <typename Fn>
seqrec_status guarded(Fn&& fn) {
    try {
        fn();
        return SEQREC_OK;
    } catch (const seqrec::SeqrecError& e) {
        return set_error(to_status(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return set_error(SEQREC_E_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return set_error(SEQREC_E_INTERNAL, e.what());
    } catch (...) {
        return set_error(SEQREC_E_INTERNAL, "unknown error");
    }
}

seqrec_status require(bool ok, const char* what) {
    return ok ? SEQREC_OK : set_error(SEQREC_E_INVALID_ARGUMENT, what);
}

char* copy_to_c_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

std::string format_recommendations(const std::vector<seqrec::pipeline::Recommendation>& recs) {
    std::string text;
    char buf[64];
    for (const auto& rec : recs) {
        std::snprintf(buf, sizeof(buf), "%.10g", rec.score);
        text += rec.item_id;
        text += '\t';
        text += buf;
        text += '\n';
    }
    return text;
}

std::vector<std::string> collect_item_ids(const char* const* item_ids, size_t n_items) {
    std::vector<std::string> ids;
    ids.reserve(n_items);
    for (size_t i = 0; i < n_items; ++i) {
        if (item_ids[i] == nullptr) {
            seqrec::fail(seqrec::ErrorCode::InvalidArgument, "item_ids contains a NULL entry");
        }
        ids.emplace_back(item_ids[i]);
    }
    return ids;
}

}  // namespace

struct seqrec_config {
    seqrec::RunConfig impl;
};

struct seqrec_embeddings {
    seqrec::EmbeddingTable table;
};

struct seqrec_recommender {
    seqrec::EmbeddingTable table;
    seqrec::ModelParams params;
    std::optional<seqrec::RpForest> forest;
};

extern "C" {

const char* seqrec_version(void) { return "1.0.0"; }

const char* seqrec_status_name(seqrec_status status) {
    if (status == SEQREC_OK) return "ok";
    return seqrec::error_code_name(static_cast<seqrec::ErrorCode>(static_cast<int>(status)));
}

int seqrec_status_is_validation(seqrec_status status) {
    return status != SEQREC_OK &&
                   seqrec::is_validation_error(static_cast<seqrec::ErrorCode>(static_cast<int>(status)))
               ? 1
               : 0;
}

const char* seqrec_last_error(void) { return g_last_error.c_str(); }

seqrec_status seqrec_config_create(seqrec_config** out_config) {
    if (const auto bad = require(out_config != nullptr, "out_config is NULL")) return bad;
    return guarded([&] { *out_config = new seqrec_config{}; });
}

seqrec_status seqrec_config_load(const char* path, seqrec_config** out_config) {
    if (const auto bad = require(path != nullptr && out_config != nullptr, "path or out_config is NULL"))
        return bad;
    return guarded([&] { *out_config = new seqrec_config{seqrec::RunConfig::load(path)}; });
}

seqrec_status seqrec_config_set(seqrec_config* config, const char* key, const char* value) {
    if (const auto bad =
            require(config != nullptr && key != nullptr && value != nullptr, "NULL argument"))
        return bad;
    return guarded([&] { config->impl.set(key, value); });
}

seqrec_status seqrec_config_get(const seqrec_config* config, const char* key, char* buf, size_t buf_len) {
    if (const auto bad =
            require(config != nullptr && key != nullptr && buf != nullptr && buf_len > 0, "NULL argument"))
        return bad;
    return guarded([&] {
        const std::string& value = config->impl.get(key);
        if (value.size() + 1 > buf_len) {
            seqrec::fail(seqrec::ErrorCode::InvalidArgument,
                         "buffer too small for value of '" + std::string(key) + "'");
        }
        std::memcpy(buf, value.c_str(), value.size() + 1);
    });
}

seqrec_status seqrec_config_validate(const seqrec_config* config) {
    if (const auto bad = require(config != nullptr, "config is NULL")) return bad;
    return guarded([&] { config->impl.validate(); });
}

void seqrec_config_free(seqrec_config* config) { delete config; }

seqrec_status seqrec_run_synth(const seqrec_config* config) {
    if (const auto bad = require(config != nullptr, "config is NULL")) return bad;
    return guarded([&] { seqrec::pipeline::cmd_synth(config->impl); });
}

seqrec_status seqrec_run_ingest(const seqrec_config* config) {
    if (const auto bad = require(config != nullptr, "config is NULL")) return bad;
    return guarded([&] { seqrec::pipeline::cmd_ingest(config->impl); });
}

seqrec_status seqrec_run_train_embeddings(const seqrec_config* config) {
    if (const auto bad = require(config != nullptr, "config is NULL")) return bad;
    return guarded([&] { seqrec::pipeline::cmd_train_embeddings(config->impl); });
}

seqrec_status seqrec_run_train_model(const seqrec_config* config) {
    if (const auto bad = require(config != nullptr, "config is NULL")) return bad;
    return guarded([&] { seqrec::pipeline::cmd_train_model(config->impl); });
}

seqrec_status seqrec_run_evaluate(const seqrec_config* config) {
    if (const auto bad = require(config != nullptr, "config is NULL")) return bad;
    return guarded([&] { seqrec::pipeline::cmd_evaluate(config->impl); });
}

seqrec_status seqrec_run_pipeline(const seqrec_config* config) {
    if (const auto bad = require(config != nullptr, "config is NULL")) return bad;
    return guarded([&] { seqrec::pipeline::run_pipeline(config->impl); });
}

seqrec_status seqrec_run_recommend(const seqrec_config* config, const char* const* item_ids,
                                   size_t n_items, size_t top_n, char** out_text) {
    if (const auto bad = require(config != nullptr && out_text != nullptr &&
                                     (item_ids != nullptr || n_items == 0),
                                 "NULL argument"))
        return bad;
    return guarded([&] {
        const auto ids = collect_item_ids(item_ids, n_items);
        const auto recs = seqrec::pipeline::cmd_recommend(config->impl, ids, top_n);
        *out_text = copy_to_c_string(format_recommendations(recs));
    });
}

void seqrec_string_free(char* text) { delete[] text; }

seqrec_status seqrec_embeddings_load(const char* path, seqrec_embeddings** out_embeddings) {
    if (const auto bad = require(path != nullptr && out_embeddings != nullptr, "NULL argument")) return bad;
    return guarded([&] {
        *out_embeddings = new seqrec_embeddings{seqrec::EmbeddingTable::load(path)};
    });
}

void seqrec_embeddings_free(seqrec_embeddings* embeddings) { delete embeddings; }

size_t seqrec_embeddings_count(const seqrec_embeddings* embeddings) {
    return embeddings == nullptr ? 0 : embeddings->table.size();
}

size_t seqrec_embeddings_dim(const seqrec_embeddings* embeddings) {
    return embeddings == nullptr ? 0 : embeddings->table.dim();
}

seqrec_status seqrec_embeddings_lookup(const seqrec_embeddings* embeddings, const char* item_id,
                                       float* out_vector) {
    if (const auto bad = require(embeddings != nullptr && item_id != nullptr && out_vector != nullptr,
                                 "NULL argument"))
        return bad;
    return guarded([&] {
        const auto index = embeddings->table.find(item_id);
        if (!index) seqrec::fail(seqrec::ErrorCode::UnknownItem, "unknown item id: " + std::string(item_id));
        const auto row = embeddings->table.row(*index);
        std::memcpy(out_vector, row.data(), row.size() * sizeof(float));
    });
}

seqrec_status seqrec_recommender_open(const char* embeddings_path, const char* checkpoint_path,
                                      const char* index_path, seqrec_recommender** out_recommender) {
    if (const auto bad = require(embeddings_path != nullptr && checkpoint_path != nullptr &&
                                     out_recommender != nullptr,
                                 "NULL argument"))
        return bad;
    return guarded([&] {
        auto rec = std::make_unique<seqrec_recommender>();
        rec->table = seqrec::EmbeddingTable::load(embeddings_path);
        rec->params = seqrec::load_checkpoint(checkpoint_path).first;
        if (rec->params.dim != rec->table.dim()) {
            seqrec::fail(seqrec::ErrorCode::Config, "checkpoint dim does not match embeddings");
        }
        if (index_path != nullptr) {
            rec->forest = seqrec::RpForest::load(index_path);
            if (rec->forest->size() != rec->table.size() || rec->forest->dim() != rec->table.dim()) {
                seqrec::fail(seqrec::ErrorCode::Config, "index does not match embeddings");
            }
        }
        *out_recommender = rec.release();
    });
}

seqrec_status seqrec_recommender_recommend(const seqrec_recommender* recommender,
                                           const char* const* item_ids, size_t n_items, size_t top_n,
                                           int exclude_inputs, char** out_text) {
    if (const auto bad = require(recommender != nullptr && out_text != nullptr && n_items > 0 &&
                                     item_ids != nullptr && top_n > 0,
                                 "NULL or empty argument"))
        return bad;
    return guarded([&] {
        const auto ids = collect_item_ids(item_ids, n_items);
        std::vector<seqrec::ItemIndex> input;
        std::string unknown;
        for (const auto& id : ids) {
            if (const auto index = recommender->table.find(id)) {
                input.push_back(*index);
            } else {
                unknown += unknown.empty() ? id : ", " + id;
            }
        }
        if (!unknown.empty()) seqrec::fail(seqrec::ErrorCode::UnknownItem, "unknown item ids: " + unknown);
        if (input.size() > seqrec::kMaxInputLength) {
            input.erase(input.begin(),
                        input.end() - static_cast<std::ptrdiff_t>(seqrec::kMaxInputLength));
        }

        const std::vector<double> z = seqrec::predict(recommender->params, recommender->table, input);
        std::vector<seqrec::ScoredItem> ranked;
        const std::size_t want = top_n + (exclude_inputs != 0 ? input.size() : 0);
        if (recommender->forest.has_value()) {
            ranked = recommender->forest->query(z, want);
        } else {
            ranked = seqrec::exact_query(recommender->table, z, want);
        }

        std::vector<seqrec::pipeline::Recommendation> recs;
        for (const auto& scored : ranked) {
            if (exclude_inputs != 0 &&
                std::find(input.begin(), input.end(), scored.item) != input.end()) {
                continue;
            }
            recs.push_back(seqrec::pipeline::Recommendation{
                recommender->table.items()[scored.item], scored.similarity});
            if (recs.size() == top_n) break;
        }
        *out_text = copy_to_c_string(format_recommendations(recs));
    });
}

void seqrec_recommender_free(seqrec_recommender* recommender) { delete recommender; }

}  // extern "C"
