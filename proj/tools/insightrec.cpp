// Command-line front end: batch analysis of a CSV file, or the HTTP service.
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "insight/engine.hpp"
#include "insight/report.hpp"
#include "insight/service.hpp"

namespace {

httplib::Server* running_server = nullptr;

void stop_server(int) {
    if (running_server) running_server->stop();
}

insight::EngineConfig read_config(const std::string& path) {
    if (path.empty()) return {};
    std::ifstream in(path);
    if (!in) throw insight::ConfigError("cannot open config '" + path + "'");
    const auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw insight::ConfigError("config '" + path + "' is not valid JSON");
    return insight::EngineConfig::from_json(doc);
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');)
        if (const auto t = insight::trim(item); !t.empty()) out.emplace_back(t);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Insight discovery and visualization recommendation"};
    app.require_subcommand(1);

    std::string csv_path, config_path, filter, format = "json", output;
    std::optional<std::size_t> top_r, top_k, threads;
    std::optional<std::uint64_t> seed;
    auto* analyze = app.add_subcommand("analyze", "Analyze a CSV file and print the recommendation report");
    analyze->add_option("csv", csv_path, "Input CSV file")->required();
    analyze->add_option("--top-r", top_r, "Insight-type rows to report (default 10)");
    analyze->add_option("--top-k", top_k, "Insights per row (default 5)");
    analyze->add_option("--filter", filter, "Comma-separated columns every insight must include");
    analyze->add_option("--format", format, "Output format")->check(CLI::IsMember({"json", "markdown"}));
    analyze->add_option("--seed", seed, "Random seed");
    analyze->add_option("--config", config_path, "JSON config file");
    analyze->add_option("--threads", threads, "Worker threads (0 = all cores)");
    analyze->add_option("-o,--output", output, "Write the report here instead of stdout");

    int port = -1;
    std::string data_dir;
    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    serve->add_option("--port", port, "Port (default $INSIGHT_PORT or 8080)");
    serve->add_option("--data-dir", data_dir, "Data directory (default $INSIGHT_DATA_DIR or ./insight-data)");
    serve->add_option("--config", config_path, "JSON config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        auto cfg = read_config(config_path);
        if (*analyze) {
            if (top_r) cfg.top_r = *top_r;
            if (top_k) cfg.top_k = *top_k;
            if (seed) cfg.ingest.seed = *seed;
            if (threads) cfg.threads = *threads;
            if (cfg.top_r == 0 || cfg.top_k == 0) throw insight::ConfigError("--top-r and --top-k must be positive");
            const auto ds = insight::load_csv(csv_path, cfg.ingest);
            const auto ctx = insight::build_context(ds, cfg);
            const auto recs = insight::recommend(ctx, split_list(filter), cfg.top_r, cfg.top_k);
            const std::string text = format == "markdown" ? insight::to_markdown(recs) : insight::to_json(recs).dump(2) + "\n";
            if (output.empty()) {
                std::cout << text;
            } else {
                std::ofstream out(output, std::ios::binary);
                out << text;
                if (!out) throw insight::InputError("cannot write '" + output + "'");
            }
            return 0;
        }

        insight::ServiceConfig sc;
        sc.engine = cfg;
        sc = insight::ServiceConfig::from_env(sc);
        if (!data_dir.empty()) sc.data_dir = data_dir;
        if (port < 0) port = insight::port_from_env();
        insight::InsightService service(sc);
        httplib::Server server;
        service.mount(server);
        running_server = &server;
        std::signal(SIGINT, stop_server);
        std::signal(SIGTERM, stop_server);
        std::cerr << "listening on port " << port << ", data in " << sc.data_dir << "\n";
        if (!server.listen("0.0.0.0", port)) {
            std::cerr << "error: cannot listen on port " << port << "\n";
            return 1;
        }
        return 0;
    } catch (const insight::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const insight::InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
