#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dataset.hpp"
#include "engine.hpp"
#include "error.hpp"
#include "report.hpp"

// After the engine: <resolv.h>, pulled in by httplib, defines a `_res` macro
// that collides with Eigen parameter names.
#include "httplib.h"

namespace insight {

class NotFoundError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ServiceConfig {
    std::filesystem::path data_dir = "insight-data";
    EngineConfig engine;

    // INSIGHT_DATA_DIR overrides the data directory when set.
    static ServiceConfig from_env(ServiceConfig base) {
        if (const char* dir = std::getenv("INSIGHT_DATA_DIR"); dir && *dir) base.data_dir = dir;
        return base;
    }
};

inline int port_from_env(int fallback = 8080) {
    const char* p = std::getenv("INSIGHT_PORT");
    if (!p || !*p) return fallback;
    const auto v = parse_number(p);
    if (!v || *v < 0 || *v > 65535 || std::floor(*v) != *v) throw ConfigError("INSIGHT_PORT must be a port number");
    return static_cast<int>(*v);
}

// Engine access plus bookmark persistence. Analyzed datasets are immutable
// shared state; bookmarks are the only mutable state and every write goes
// through one lock, appending to a JSON-lines journal.
class InsightService {
public:
    explicit InsightService(ServiceConfig config) : config_(std::move(config)) {
        namespace fs = std::filesystem;
        fs::create_directories(datasets_dir());
        for (const auto& entry : fs::directory_iterator(datasets_dir())) {
            if (entry.path().extension() != ".csv") continue;
            next_dataset_ = std::max(next_dataset_, sequence_of(entry.path().stem().string()) + 1);
        }
        load_journal();
    }

    const ServiceConfig& config() const { return config_; }

    // Parses and analyzes an upload, then stores it. Identical uploads get
    // distinct ids.
    nlohmann::json upload(const std::string& name, const std::string& csv) {
        auto ds = parse_csv(csv, name.empty() ? "upload.csv" : name, config_.engine.ingest);
        auto ctx = std::make_shared<const AnalysisContext>(build_context(ds, config_.engine));
        std::string id;
        {
            std::unique_lock lock(datasets_mutex_);
            id = "ds" + std::to_string(next_dataset_++);
            write_file(datasets_dir() / (id + ".csv"), csv);
            write_file(datasets_dir() / (id + ".name"), ds.name());
            contexts_[id] = ctx;
        }
        return {{"dataset_id", id}, {"schema", schema_json(ds)}};
    }

    bool has_dataset(const std::string& id) const {
        {
            std::shared_lock lock(datasets_mutex_);
            if (contexts_.count(id)) return true;
        }
        return valid_id(id) && std::filesystem::exists(datasets_dir() / (id + ".csv"));
    }

    // Cached analysis; datasets stored by an earlier process are re-analyzed
    // on first use.
    std::shared_ptr<const AnalysisContext> context(const std::string& id) {
        {
            std::shared_lock lock(datasets_mutex_);
            if (auto it = contexts_.find(id); it != contexts_.end()) return it->second;
        }
        if (!has_dataset(id)) throw NotFoundError("unknown dataset '" + id + "'");
        std::string name = id + ".csv";
        if (std::ifstream in(datasets_dir() / (id + ".name")); in) std::getline(in, name);
        auto ds = parse_csv(read_file(datasets_dir() / (id + ".csv")), name, config_.engine.ingest);
        auto ctx = std::make_shared<const AnalysisContext>(build_context(ds, config_.engine));
        std::unique_lock lock(datasets_mutex_);
        return contexts_.try_emplace(id, std::move(ctx)).first->second;
    }

    nlohmann::json schema(const std::string& id) { return schema_json(*context(id)->dataset); }

    nlohmann::json recommendations(const std::string& id, const std::vector<std::string>& attributes,
                                   std::size_t top_r, std::size_t top_k) {
        return to_json(recommend(*context(id), attributes, top_r, top_k));
    }

    nlohmann::json create_bookmark(const nlohmann::json& body) {
        if (!body.is_object()) throw InputError("bookmark must be a JSON object");
        const auto text = [&](const char* key) {
            if (!body.contains(key) || !body[key].is_string()) throw InputError(std::string("missing \"") + key + "\"");
            return body[key].get<std::string>();
        };
        const auto dataset_id = text("dataset_id");
        const auto type_id = text("insight_type_id");
        std::vector<std::string> columns;
        const auto& comb = body.contains("combination") ? body["combination"] : nlohmann::json();
        const auto& cols = comb.is_object() && comb.contains("columns") ? comb["columns"] : comb;
        if (!cols.is_array() || cols.empty()) throw InputError("\"combination\" must list its columns");
        for (const auto& c : cols) {
            if (!c.is_string()) throw InputError("combination columns must be strings");
            columns.push_back(c.get<std::string>());
        }

        const auto ctx = context(dataset_id);
        const auto it = std::find_if(ctx->pool.begin(), ctx->pool.end(), [&](const auto& c) {
            return c.insight_type_id == type_id && c.combination.column_names == columns;
        });
        if (it == ctx->pool.end()) throw InputError("no '" + type_id + "' insight for that combination");
        auto chart = annotate(*it, infer_charts(*it).front(), ctx->config.max_marks);
        attach_inline_data(chart, *ctx->dataset, it->combination,
                           derive_seed(ctx->config.ingest.seed, it->insight_type_id, it->combination.key(), "chart"));

        std::unique_lock lock(bookmarks_mutex_);
        nlohmann::json bookmark{{"id", "bm" + std::to_string(next_bookmark_++)},
                                {"dataset_id", dataset_id},
                                {"insight_type_id", type_id},
                                {"combination", to_json(it->combination)},
                                {"chart", to_json(chart)},
                                {"created_at", now_iso()}};
        append_journal({{"op", "add"}, {"bookmark", bookmark}});
        bookmarks_.push_back(bookmark);
        return bookmark;
    }

    nlohmann::json list_bookmarks(const std::string& dataset_id = {}) const {
        std::shared_lock lock(bookmarks_mutex_);
        nlohmann::json out = nlohmann::json::array();
        for (const auto& b : bookmarks_)
            if (dataset_id.empty() || b["dataset_id"] == dataset_id) out.push_back(b);
        return out;
    }

    bool delete_bookmark(const std::string& id) {
        std::unique_lock lock(bookmarks_mutex_);
        const auto it = std::find_if(bookmarks_.begin(), bookmarks_.end(), [&](const auto& b) { return b["id"] == id; });
        if (it == bookmarks_.end()) return false;
        append_journal({{"op", "delete"}, {"id", id}});
        bookmarks_.erase(it);
        return true;
    }

    void mount(httplib::Server& server) {
        server.Post("/datasets", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                std::string name = req.has_param("name") ? req.get_param_value("name") : "";
                std::string body = req.body;
                if (req.is_multipart_form_data()) {
                    if (!req.has_file("file")) throw InputError("multipart upload needs a \"file\" part");
                    const auto file = req.get_file_value("file");
                    body = file.content;
                    if (name.empty()) name = file.filename;
                }
                reply(res, 200, upload(name, body));
            });
        });
        server.Get("/datasets/:id", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { reply(res, 200, schema(req.path_params.at("id"))); });
        });
        server.Get("/datasets/:id/recommendations", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                std::vector<std::string> attributes;
                if (req.has_param("attributes")) {
                    std::stringstream ss(req.get_param_value("attributes"));
                    for (std::string a; std::getline(ss, a, ',');)
                        if (const auto t = trim(a); !t.empty()) attributes.emplace_back(t);
                }
                const auto count = [&](const char* key, std::size_t fallback) {
                    if (!req.has_param(key)) return fallback;
                    const auto v = parse_number(req.get_param_value(key));
                    if (!v || *v < 1 || std::floor(*v) != *v) throw ConfigError(std::string(key) + " must be a positive integer");
                    return static_cast<std::size_t>(*v);
                };
                const auto top_r = count("top_r", config_.engine.top_r);
                const auto top_k = count("top_k", config_.engine.top_k);
                const auto id = req.path_params.at("id");
                if (!has_dataset(id)) throw NotFoundError("unknown dataset '" + id + "'");
                try {
                    reply(res, 200, recommendations(id, attributes, top_r, top_k));
                } catch (const InputError& e) {
                    reply(res, 422, error_body("unknown_attribute", e.what()));
                }
            });
        });
        server.Post("/bookmarks", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                const auto body = nlohmann::json::parse(req.body, nullptr, false);
                if (body.is_discarded()) throw InputError("body is not valid JSON");
                reply(res, 201, create_bookmark(body));
            });
        });
        server.Get("/bookmarks", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                reply(res, 200, list_bookmarks(req.has_param("dataset_id") ? req.get_param_value("dataset_id") : ""));
            });
        });
        server.Delete("/bookmarks/:id", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                const auto id = req.path_params.at("id");
                if (!delete_bookmark(id)) throw NotFoundError("unknown bookmark '" + id + "'");
                res.status = 204;
            });
        });
    }

private:
    static nlohmann::json error_body(const std::string& error, const std::string& detail) {
        return {{"error", error}, {"detail", detail}};
    }

    static void reply(httplib::Response& res, int status, const nlohmann::json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    template <typename Fn>
    static void handle(httplib::Response& res, Fn&& fn) {
        try {
            fn();
        } catch (const NotFoundError& e) {
            reply(res, 404, error_body("not_found", e.what()));
        } catch (const InputError& e) {
            reply(res, 400, error_body("bad_input", e.what()));
        } catch (const ConfigError& e) {
            reply(res, 400, error_body("bad_parameter", e.what()));
        } catch (const std::exception& e) {
            reply(res, 500, error_body("internal", e.what()));
        }
    }

    std::filesystem::path datasets_dir() const { return config_.data_dir / "datasets"; }
    std::filesystem::path journal_path() const { return config_.data_dir / "bookmarks.jsonl"; }

    static bool valid_id(const std::string& id) {
        return id.size() > 2 && id.rfind("ds", 0) == 0 &&
               std::all_of(id.begin() + 2, id.end(), [](unsigned char c) { return std::isdigit(c); });
    }

    static std::size_t sequence_of(const std::string& id) {
        std::size_t i = 0;
        while (i < id.size() && !std::isdigit(static_cast<unsigned char>(id[i]))) ++i;
        if (i == id.size()) return 0;
        return static_cast<std::size_t>(std::strtoull(id.c_str() + i, nullptr, 10));
    }

    static std::string read_file(const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    }

    static void write_file(const std::filesystem::path& p, const std::string& content) {
        const auto tmp = p.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out << content;
            if (!out) throw std::runtime_error("cannot write " + tmp);
        }
        std::filesystem::rename(tmp, p);
    }

    static std::string now_iso() {
        const auto now = std::chrono::system_clock::now();
        return format_timestamp(static_cast<double>(std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count()));
    }

    // Replays the journal, then rewrites it with only the live bookmarks.
    void load_journal() {
        if (std::ifstream in(journal_path()); in) {
            for (std::string line; std::getline(in, line);) {
                const auto entry = nlohmann::json::parse(line, nullptr, false);
                if (entry.is_discarded() || !entry.is_object()) continue;  // torn final write
                if (entry.value("op", "") == "add" && entry.contains("bookmark")) {
                    bookmarks_.push_back(entry["bookmark"]);
                    next_bookmark_ = std::max(next_bookmark_, sequence_of(entry["bookmark"].value("id", "")) + 1);
                } else if (entry.value("op", "") == "delete") {
                    const auto id = entry.value("id", "");
                    std::erase_if(bookmarks_, [&](const auto& b) { return b.value("id", "") == id; });
                }
            }
        }
        std::string compacted;
        for (const auto& b : bookmarks_) compacted += nlohmann::json{{"op", "add"}, {"bookmark", b}}.dump() + "\n";
        write_file(journal_path(), compacted);
    }

    void append_journal(const nlohmann::json& entry) {
        std::ofstream out(journal_path(), std::ios::app | std::ios::binary);
        out << entry.dump() << '\n';
        out.flush();
        if (!out) throw std::runtime_error("cannot append to the bookmark journal");
    }

    ServiceConfig config_;
    mutable std::shared_mutex datasets_mutex_;
    std::map<std::string, std::shared_ptr<const AnalysisContext>> contexts_;
    std::size_t next_dataset_ = 1;

    mutable std::shared_mutex bookmarks_mutex_;
    std::vector<nlohmann::json> bookmarks_;
    std::size_t next_bookmark_ = 1;
};

}  // namespace insight
