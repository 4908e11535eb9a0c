// leamatch: ingest | synth | train | score | serve | report
#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "leamatch/api.hpp"
#include "leamatch/config.hpp"
#include "leamatch/digest.hpp"
#include "leamatch/report.hpp"
#include "leamatch/training.hpp"

namespace fs = std::filesystem;
using namespace leamatch;

namespace {

std::vector<ManifestRow> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    return read_manifest_csv(in);
}

std::vector<std::string> split_ids(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string id;
    while (std::getline(ss, id, ','))
        if (!id.empty()) out.push_back(id);
    return out;
}

HttpServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bullet land comparison pipeline and examiner service"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "INI file with pipeline, forest, training and generator settings")
        ->check(CLI::ExistingFile);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Validate LEASCAN1 files and add them to a scan store");
    std::string ingest_dir, store_dir;
    ingest->add_option("dir", ingest_dir, "Directory of .leascan files")->required()->check(CLI::ExistingDirectory);
    ingest->add_option("--store", store_dir, "Scan store directory")->required();

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a labelled synthetic dataset");
    int n_barrels = 15, per_barrel = 3;
    std::uint64_t seed = 42;
    std::string synth_out;
    synth->add_option("--barrels", n_barrels, "Number of barrels")->check(CLI::PositiveNumber);
    synth->add_option("--bullets", per_barrel, "Bullets fired per barrel")->check(CLI::PositiveNumber);
    synth->add_option("--seed", seed, "Generator seed");
    synth->add_option("--out", synth_out, "Output directory")->required();

    // train
    auto* train = app.add_subcommand("train", "Train the random forest on the training barrels");
    std::string train_store, manifest_path, barrels_path, forest_out;
    train->add_option("--store", train_store, "Scan store directory")->required()->check(CLI::ExistingDirectory);
    train->add_option("--manifest", manifest_path, "manifest.csv")->required()->check(CLI::ExistingFile);
    train->add_option("--barrels", barrels_path, "barrels.csv (barrel_id,split); training uses split=train")
        ->required()
        ->check(CLI::ExistingFile);
    train->add_option("--out", forest_out, "Forest file to write")->required();

    // score
    auto* score = app.add_subcommand("score", "Score bullets against each other and write CSV tables");
    std::string score_store, score_forest, score_bullets, score_out;
    score->add_option("--store", score_store, "Scan store directory")->required()->check(CLI::ExistingDirectory);
    score->add_option("--forest", score_forest, "Forest file")->required()->check(CLI::ExistingFile);
    score->add_option("--bullets", score_bullets, "Comma separated bullet ids (default: every bullet in the store)");
    score->add_option("--out", score_out, "Output directory")->required();

    // serve
    auto* serve = app.add_subcommand("serve", "Run the examiner HTTP API");
    std::string serve_store, serve_forest, serve_state, host = "127.0.0.1", token;
    int port = 8080;
    std::vector<std::string> case_specs;
    serve->add_option("--store", serve_store, "Scan store directory")->required()->check(CLI::ExistingDirectory);
    serve->add_option("--forest", serve_forest, "Forest file")->required()->check(CLI::ExistingFile);
    serve->add_option("--state", serve_state, "Directory for cases, artifacts and session logs")->required();
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port (0 picks one)");
    serve->add_option("--token", token, "Require this bearer token");
    serve->add_option("--case", case_specs, "Define and compute a case: ID=B001,B002,...");

    // report
    auto* report = app.add_subcommand("report", "Write a markdown/CSV bundle for one session");
    std::string report_state, report_session, report_out, report_manifest;
    bool reveal = false;
    report->add_option("--state", report_state, "Service state directory")->required()->check(CLI::ExistingDirectory);
    report->add_option("--session", report_session, "Session id")->required();
    report->add_option("--out", report_out, "Output directory")->required();
    report->add_flag("--reveal-truth", reveal, "Append generator ground truth (concluded sessions only)");
    report->add_option("--manifest", report_manifest, "manifest.csv holding the ground truth")->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        const Config cfg = config_path.empty() ? Config{} : load_config(config_path);

        if (*ingest) {
            ScanStore store(store_dir);
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(ingest_dir))
                if (e.path().extension() == ".leascan") files.push_back(e.path());
            std::sort(files.begin(), files.end());
            int rejected = 0;
            for (const auto& f : files) {
                try {
                    const auto scan = load_scan_file(f.string());
                    const auto digest = store.put(scan);
                    std::cout << scan.bullet_id << '/' << scan.land_id << ' ' << digest_hex(digest) << '\n';
                } catch (const Error& e) {
                    ++rejected;
                    std::cerr << f.filename().string() << ": " << e.what() << '\n';
                }
            }
            std::cout << files.size() - rejected << " ingested, " << rejected << " rejected\n";
            return rejected == 0 ? 0 : 2;
        }

        if (*synth) {
            const auto ds = make_dataset(n_barrels, per_barrel, seed, cfg.synth);
            write_dataset(ds, synth_out);
            std::cout << ds.bullets.size() << " bullets from " << ds.barrels.size() << " barrels ("
                      << ds.train_barrels.size() << " train, " << ds.holdout_barrels.size() << " holdout), manifest "
                      << digest_hex(manifest_digest(ds.manifest)) << '\n';
            return 0;
        }

        if (*train) {
            ScanStore store(train_store);
            const auto manifest = read_manifest(manifest_path);
            std::ifstream bin(barrels_path);
            std::set<std::string> train_barrels;
            for (const auto& [id, split] : read_barrels_csv(bin))
                if (split == "train") train_barrels.insert(id);
            std::vector<Bullet> bullets;
            for (const auto& id : bullets_of_barrels(manifest, train_barrels)) bullets.push_back(store.bullet(id));
            const auto processed = process_bullets(bullets, cfg.pipeline.surface);
            const auto forest = train_on_barrels(manifest, processed, train_barrels, cfg);
            save_forest_file(forest, forest_out);
            std::cout << forest.n_trees() << " trees, oob accuracy " << forest.oob_accuracy << ", digest "
                      << digest_hex(forest_digest(forest)) << '\n';
            return 0;
        }

        if (*score) {
            ScanStore store(score_store);
            const auto forest = load_forest_file(score_forest);
            const auto ids = score_bullets.empty() ? store.bullet_ids() : split_ids(score_bullets);
            std::vector<Bullet> bullets;
            for (const auto& id : ids) bullets.push_back(store.bullet(id));
            const auto art = compute_artifacts("cli", bullets, forest, cfg.pipeline);
            write_score_bundle(art, score_out);
            std::cout << "artifacts " << digest_hex(art.artifact_digest) << " written to " << score_out << '\n';
            return 0;
        }

        if (*serve) {
            auto store = std::make_shared<ScanStore>(serve_store);
            ServiceOptions opts;
            opts.state_dir = serve_state;
            ExaminerService service(store, load_forest_file(serve_forest), cfg.pipeline, opts);
            for (const auto& spec : case_specs) {
                const auto eq = spec.find('=');
                if (eq == std::string::npos) throw Error(ErrorCode::BadRequest, "--case expects ID=B1,B2,...");
                const auto id = spec.substr(0, eq);
                service.define_case(id, split_ids(spec.substr(eq + 1)));
                const auto art = service.compute_case(id);
                std::cout << "case " << id << " computed, artifacts " << digest_hex(art->artifact_digest) << '\n';
            }
            ServerOptions sopts;
            sopts.host = host;
            sopts.port = port;
            if (!token.empty()) sopts.bearer_token = token;
            HttpServer server(service, sopts);
            const int bound = server.bind();
            std::cout << "listening on http://" << host << ':' << bound << "/api/v1" << std::endl;
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            server.listen();
            g_server = nullptr;
            return 0;
        }

        if (*report) {
            std::optional<std::vector<ManifestRow>> truth;
            if (reveal) {
                if (report_manifest.empty()) throw Error(ErrorCode::BadRequest, "--reveal-truth needs --manifest");
                truth = read_manifest(report_manifest);
            }
            const auto session = load_session_log(fs::path(report_state) / "sessions" / (report_session + ".jsonl"));
            write_session_report(session, report_out, truth ? &*truth : nullptr);
            std::cout << "report for " << report_session << " written to " << report_out << '\n';
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
