// ntmt: command-line front end for the template matching library.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ntmt/bitstream.hpp"
#include "ntmt/experiment.hpp"
#include "ntmt/generators.hpp"
#include "ntmt/jointdist.hpp"
#include "ntmt/matching_test.hpp"
#include "ntmt/templates.hpp"
#include "ntmt/whitening.hpp"

using namespace ntmt;
using ordered_json = nlohmann::ordered_json;

namespace {

enum exit_code { exit_ok = 0, exit_usage = 1, exit_data = 2, exit_numeric = 3 };

const std::map<std::string, file_format> format_names{{"ascii", file_format::ascii}, {"raw", file_format::raw}};
const std::map<std::string, bit_order> order_names{{"msb", bit_order::msb_first}, {"lsb", bit_order::lsb_first}};
const std::map<std::string, generator_kind> generator_names{
    {"mt19937", generator_kind::mt19937}, {"mt", generator_kind::mt19937},
    {"aes128_ctr", generator_kind::aes128_ctr}, {"aes", generator_kind::aes128_ctr}};

struct InputOptions {
    std::string path;
    file_format format = file_format::ascii;
    bit_order order = bit_order::msb_first;

    void add_to(CLI::App* cmd) {
        cmd->add_option("-i,--input", path, "Bit file")->required()->check(CLI::ExistingFile);
        cmd->add_option("--format", format, "ascii or raw")->transform(CLI::CheckedTransformer(format_names));
        cmd->add_option("--bit-order", order, "Bit order within raw bytes: msb or lsb")
            ->transform(CLI::CheckedTransformer(order_names));
    }

    BitSequence load() const { return read_bits(path, format, order); }
};

void emit(const ordered_json& j) { std::cout << j.dump(2) << '\n'; }

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw error(errc::io, "cannot write " + path);
    out << text;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw error(errc::io, "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<Template> parse_templates(const std::vector<std::string>& text) {
    std::vector<Template> out;
    for (const auto& s : text) out.push_back(Template::parse(s));
    return out;
}

void block_notes(std::size_t n, std::size_t N, unsigned m) {
    const std::size_t M = n / N;
    if (n % N)
        std::cerr << "note: dropping " << n % N << " trailing bit(s); " << N << " blocks of " << M << " bits\n";
    if (M > 0 && !block_length_adequate(M, m))
        std::cerr << "warning: block length " << M << " is below 100 * 2^" << m
                  << "; the normal approximation may be poor\n";
}

Block128 parse_block(const std::string& hex) {
    if (hex.size() != 32) throw error(errc::malformed_input, "expected 32 hex digits, got '" + hex + "'");
    Block128 b{};
    for (std::size_t i = 0; i < 16; ++i) {
        const auto byte = hex.substr(2 * i, 2);
        if (byte.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos)
            throw error(errc::malformed_input, "invalid hex digit in '" + hex + "'");
        b[i] = static_cast<std::uint8_t>(std::stoul(byte, nullptr, 16));
    }
    return b;
}

ordered_json outcome_json(const TestOutcome& o) {
    ordered_json j;
    j["template"] = o.tmpl.str();
    j["N"] = o.N;
    j["M"] = o.M;
    j["counts"] = o.counts;
    j["mu"] = o.mu;
    j["sigma_sq"] = o.sigma_sq;
    j["chi_obs"] = o.chi_obs;
    j["p_value"] = o.p_value;
    return j;
}

void add_experiment_options(CLI::App* cmd, ExperimentConfig& c) {
    cmd->add_option("--generator", c.generator, "mt19937 or aes128_ctr")
        ->transform(CLI::CheckedTransformer(generator_names));
    cmd->add_option("-K,--sequences", c.sequences, "Number of sequences");
    cmd->add_option("-n,--bits", c.bits, "Bits per sequence");
    cmd->add_option("-N,--blocks", c.blocks, "Blocks per sequence");
    cmd->add_option("--alpha", c.alpha, "Rejection threshold");
    cmd->add_option("--seed", c.base_seed, "Base seed");
    cmd->add_option("-j,--workers", c.workers, "Worker threads (0: all cores)");
}

std::string joint_csv(const JointHistogramReport& r) {
    std::ostringstream s;
    s.precision(17);
    s << "p1_bin,p2_bin,count,empirical,theoretical,residual\n";
    const unsigned G = r.config.grid;
    for (unsigned i = 0; i < G; ++i)
        for (unsigned k = 0; k < G; ++k) {
            const auto c = i * G + k;
            s << i << ',' << k << ',' << r.counts[c] << ',' << r.empirical[c] << ',' << r.theoretical[c] << ','
              << r.residuals[c] << '\n';
        }
    return s.str();
}

std::string rejection_csv(const RejectionReport& r) {
    std::ostringstream s;
    s.precision(17);
    s << "rejections,plain,orthogonalized,expected\n";
    for (std::size_t k = 0; k < r.plain.counts.size(); ++k)
        s << k << ',' << r.plain.counts[k] << ',' << r.orthogonalized.counts[k] << ',' << r.plain.expected[k] << '\n';
    return s.str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Non-overlapping template matching test with correlation-aware analysis"};
    app.set_config("--config", "", "TOML/INI file with option defaults");
    app.require_subcommand(1);

    // ---- gen --------------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "Write generator output as a bit file");
    generator_kind gen_kind = generator_kind::mt19937;
    std::uint32_t gen_seed = 5489;
    std::string gen_key = "000102030405060708090a0b0c0d0e0f", gen_counter(32, '0');
    std::optional<std::uint64_t> gen_base, gen_index;
    std::size_t gen_bits = 100000;
    std::string gen_out;
    file_format gen_format = file_format::ascii;
    bit_order gen_order = bit_order::msb_first;
    gen->add_option("--generator", gen_kind, "mt19937 or aes128_ctr")
        ->transform(CLI::CheckedTransformer(generator_names));
    gen->add_option("--mt-seed", gen_seed, "MT19937 seed");
    gen->add_option("--key", gen_key, "AES key, 32 hex digits");
    gen->add_option("--counter", gen_counter, "Initial AES counter block, 32 hex digits");
    auto* base_opt = gen->add_option("--seed", gen_base, "Experiment base seed (with --index)");
    gen->add_option("--index", gen_index, "Sequence index under --seed")->needs(base_opt);
    gen->add_option("-n,--bits", gen_bits, "Number of bits");
    gen->add_option("-o,--output", gen_out, "Output file (default stdout)");
    gen->add_option("--format", gen_format, "ascii or raw")->transform(CLI::CheckedTransformer(format_names));
    gen->add_option("--bit-order", gen_order, "msb or lsb")->transform(CLI::CheckedTransformer(order_names));

    // ---- templates --------------------------------------------------------
    auto* tpl = app.add_subcommand("templates", "Aperiodic templates and their correlations");
    tpl->require_subcommand(1);
    unsigned tpl_m = 9;
    bool tpl_json = false;
    auto* tpl_enum = tpl->add_subcommand("enumerate", "List aperiodic templates of length m");
    tpl_enum->add_option("-m,--length", tpl_m, "Template length");
    tpl_enum->add_flag("--json", tpl_json, "JSON instead of one template per line");
    std::string rho_a, rho_b;
    auto* tpl_rho = tpl->add_subcommand("rho", "Correlation of two templates");
    tpl_rho->add_option("first", rho_a)->required();
    tpl_rho->add_option("second", rho_b)->required();
    auto* tpl_matrix = tpl->add_subcommand("matrix", "Correlation matrix");
    std::vector<std::string> matrix_templates;
    bool matrix_battery = false;
    tpl_matrix->add_option("-m,--length", tpl_m, "Template length");
    tpl_matrix->add_option("-t,--templates", matrix_templates, "Explicit template list")->delimiter(',');
    tpl_matrix->add_flag("--battery", matrix_battery, "The 145-template whitening battery (m = 9)");
    tpl_matrix->add_flag("--json", tpl_json, "JSON instead of CSV");

    // ---- test run ---------------------------------------------------------
    auto* test = app.add_subcommand("test", "Single-template test");
    test->require_subcommand(1);
    auto* test_run = test->add_subcommand("run", "Run one template against a bit file");
    InputOptions test_in;
    std::string test_template;
    std::size_t test_blocks = 8;
    test_in.add_to(test_run);
    test_run->add_option("-t,--template", test_template, "Template")->required();
    test_run->add_option("-N,--blocks", test_blocks, "Number of blocks");

    // ---- battery run ------------------------------------------------------
    auto* battery = app.add_subcommand("battery", "Template battery");
    battery->require_subcommand(1);
    auto* battery_run = battery->add_subcommand("run", "Run a template battery against a bit file");
    InputOptions bat_in;
    std::size_t bat_blocks = 8;
    unsigned bat_m = 9;
    double bat_alpha = 0.01;
    bool bat_orth = false;
    std::string bat_transform;
    std::vector<std::string> bat_templates;
    bat_in.add_to(battery_run);
    battery_run->add_option("-N,--blocks", bat_blocks, "Number of blocks");
    battery_run->add_option("-m,--length", bat_m, "Template length");
    battery_run->add_option("-t,--templates", bat_templates, "Explicit template list")->delimiter(',');
    battery_run->add_option("--alpha", bat_alpha, "Rejection threshold");
    auto* orth_flag = battery_run->add_flag("--orthogonalize", bat_orth, "Use the default whitening transform");
    battery_run->add_option("--transform", bat_transform, "Whitening transform JSON file")
        ->check(CLI::ExistingFile)
        ->excludes(orth_flag);

    // ---- whitening --------------------------------------------------------
    auto* whit = app.add_subcommand("whitening", "Whitening transforms");
    whit->require_subcommand(1);
    unsigned whit_m = 9;
    std::vector<std::string> whit_templates, whit_remove;
    double whit_tol = default_zero_tolerance;
    std::string whit_out, whit_file;
    auto* whit_build = whit->add_subcommand("build", "Build a transform as JSON");
    whit_build->add_option("-m,--length", whit_m, "Template length");
    whit_build->add_option("-t,--templates", whit_templates, "Explicit template list")->delimiter(',');
    whit_build->add_option("--remove", whit_remove, "Templates to drop from the full enumeration")->delimiter(',');
    whit_build->add_option("--tolerance", whit_tol, "Relative zero-eigenvalue tolerance");
    whit_build->add_option("-o,--output", whit_out, "Output file (default stdout)");
    auto* whit_inspect = whit->add_subcommand("inspect", "Rank analysis of a template set or transform file");
    whit_inspect->add_option("-m,--length", whit_m, "Template length");
    whit_inspect->add_option("-t,--templates", whit_templates, "Explicit template list")->delimiter(',');
    whit_inspect->add_option("--remove", whit_remove, "Templates to drop from the full enumeration")->delimiter(',');
    whit_inspect->add_option("--tolerance", whit_tol, "Relative zero-eigenvalue tolerance");
    whit_inspect->add_option("-f,--file", whit_file, "Transform JSON file")->check(CLI::ExistingFile);

    // ---- jointdist --------------------------------------------------------
    auto* jd = app.add_subcommand("jointdist", "Joint distribution of two correlated statistics");
    jd->require_subcommand(1);
    JointParams jp;
    double jd_x = 0.0, jd_y = 0.0;
    unsigned jd_grid = 10;
    auto add_joint = [&](CLI::App* cmd) {
        cmd->add_option("-N,--dof", jp.N, "Degrees of freedom (even)");
        cmd->add_option("--rho", jp.rho, "Correlation")->required();
        cmd->add_option("--eps", jp.eps, "Series tolerance");
        cmd->add_option("--max-terms", jp.max_terms, "Series term cap");
    };
    auto* jd_eval = jd->add_subcommand("eval", "Evaluate the joint CDF at (X, Y)");
    add_joint(jd_eval);
    jd_eval->add_option("-X", jd_x)->required();
    jd_eval->add_option("-Y", jd_y)->required();
    auto* jd_grid_cmd = jd->add_subcommand("grid", "Cell probabilities on the p-value grid (CSV)");
    add_joint(jd_grid_cmd);
    jd_grid_cmd->add_option("-G,--grid", jd_grid, "Grid resolution");

    // ---- experiment -------------------------------------------------------
    auto* exp = app.add_subcommand("experiment", "Monte Carlo experiments");
    exp->require_subcommand(1);
    ExperimentConfig cfg;
    std::string exp_first = "001010101", exp_second = "010101011", exp_csv;
    auto* fig1 = exp->add_subcommand("fig1", "Joint p-value histogram of a template pair");
    add_experiment_options(fig1, cfg);
    fig1->add_option("-G,--grid", cfg.grid, "Grid resolution");
    fig1->add_option("--first", exp_first, "First template");
    fig1->add_option("--second", exp_second, "Second template");
    fig1->add_option("--csv", exp_csv, "Also write the cells as CSV");
    auto* fig3 = exp->add_subcommand("fig3", "Rejection-count histograms, plain and whitened");
    add_experiment_options(fig3, cfg);
    fig3->add_option("--csv", exp_csv, "Also write the histograms as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_usage;
    }

    try {
        if (gen->parsed()) {
            GeneratorSpec spec = gen_kind == generator_kind::mt19937
                                     ? mt19937_spec(gen_seed)
                                     : aes128_ctr_spec(parse_block(gen_key), parse_block(gen_counter));
            if (gen_base) spec = seed_for_index(gen_kind, *gen_base, gen_index.value_or(0));
            const auto seq = generate(spec, gen_bits);
            if (gen_out.empty()) {
                if (gen_format == file_format::ascii) {
                    std::cout << seq.to_ascii() << '\n';
                } else {
                    const auto bytes = seq.to_bytes(gen_order);
                    std::cout.write(reinterpret_cast<const char*>(bytes.data()),
                                    static_cast<std::streamsize>(bytes.size()));
                }
            } else {
                write_bits(gen_out, seq, gen_format, gen_order);
            }
        } else if (tpl_enum->parsed()) {
            const auto all = enumerate_aperiodic(tpl_m);
            if (tpl_json) {
                ordered_json j;
                j["m"] = tpl_m;
                j["count"] = all.size();
                j["templates"] = nlohmann::json::array();
                for (const auto& t : all) j["templates"].push_back(t.str());
                emit(j);
            } else {
                for (const auto& t : all) std::cout << t.str() << '\n';
            }
        } else if (tpl_rho->parsed()) {
            const auto a = Template::parse(rho_a), b = Template::parse(rho_b);
            const auto r = correlation_ratio(a, b);
            ordered_json j;
            j["first"] = a.str();
            j["second"] = b.str();
            j["rho"] = r.value();
            j["numerator"] = r.num;
            j["denominator"] = r.den;
            emit(j);
        } else if (tpl_matrix->parsed()) {
            const auto templates = !matrix_templates.empty() ? parse_templates(matrix_templates)
                                   : matrix_battery          ? default_battery(tpl_m)
                                                             : enumerate_aperiodic(tpl_m);
            const auto sigma = correlation_matrix(templates);
            if (tpl_json) {
                ordered_json j;
                j["templates"] = nlohmann::json::array();
                for (const auto& t : templates) j["templates"].push_back(t.str());
                j["entries"] = nlohmann::json::array();
                for (Eigen::Index r = 0; r < sigma.entries.rows(); ++r) {
                    std::vector<double> row(sigma.entries.row(r).begin(), sigma.entries.row(r).end());
                    j["entries"].push_back(row);
                }
                emit(j);
            } else {
                std::ostringstream s;
                s.precision(17);
                s << "template";
                for (const auto& t : templates) s << ',' << t.str();
                s << '\n';
                for (Eigen::Index r = 0; r < sigma.entries.rows(); ++r) {
                    s << templates[r].str();
                    for (Eigen::Index c = 0; c < sigma.entries.cols(); ++c) s << ',' << sigma.entries(r, c);
                    s << '\n';
                }
                std::cout << s.str();
            }
        } else if (test_run->parsed()) {
            const auto t = Template::parse(test_template);
            const auto seq = test_in.load();
            block_notes(seq.size(), test_blocks, t.length());
            emit(outcome_json(run_test(seq, t, test_blocks)));
        } else if (battery_run->parsed()) {
            if (!(bat_alpha > 0.0 && bat_alpha < 1.0)) throw error(errc::domain, "alpha must lie in (0, 1)");
            std::optional<WhiteningTransform> transform;
            if (!bat_transform.empty())
                transform = transform_from_json(nlohmann::json::parse(read_text(bat_transform)));
            else if (bat_orth)
                transform = default_transform();
            const auto templates = transform                  ? transform->templates
                                   : !bat_templates.empty() ? parse_templates(bat_templates)
                                                            : enumerate_aperiodic(bat_m);
            check_battery_templates(templates);
            const unsigned m = templates.front().length();
            const auto seq = bat_in.load();
            if (seq.size() < bat_blocks * m)
                throw error(errc::sequence_too_short, "input has " + std::to_string(seq.size()) +
                                                          " bits; at least N * m = " +
                                                          std::to_string(bat_blocks * m) + " are required");
            block_notes(seq.size(), bat_blocks, m);
            const BlockWindowCounts hist(seq, bat_blocks, m);

            ordered_json j;
            j["input"] = bat_in.path;
            j["bits"] = seq.size();
            j["N"] = hist.blocks();
            j["M"] = hist.block_length();
            j["m"] = m;
            j["alpha"] = bat_alpha;
            j["orthogonalized"] = transform.has_value();
            j["template_hash"] = template_list_hash(templates);
            j["transform_hash"] = transform ? ordered_json(transform_hash(*transform)) : ordered_json(nullptr);
            std::size_t rejections = 0;
            auto items = ordered_json::array();
            if (transform) {
                const auto res = orthogonal_battery(hist, templates, *transform);
                for (std::size_t k = 0; k < res.item_p_values.size(); ++k) {
                    const bool reject = res.item_p_values[k] < bat_alpha;
                    rejections += reject;
                    items.push_back({{"item", k}, {"p_value", res.item_p_values[k]}, {"reject", reject}});
                }
                j["items"] = items;
                auto raw = ordered_json::array();
                for (std::size_t k = 0; k < templates.size(); ++k)
                    raw.push_back({{"template", templates[k].str()}, {"p_value", res.raw_p_values[k]}});
                j["raw"] = raw;
            } else {
                const auto p = battery_p_values(hist, templates);
                for (std::size_t k = 0; k < p.size(); ++k) {
                    const bool reject = p[k] < bat_alpha;
                    rejections += reject;
                    items.push_back({{"template", templates[k].str()}, {"p_value", p[k]}, {"reject", reject}});
                }
                j["items"] = items;
            }
            j["rejections"] = rejections;
            emit(j);
        } else if (whit_build->parsed() || whit_inspect->parsed()) {
            std::vector<Template> removed = parse_templates(whit_remove);
            std::vector<Template> templates;
            if (!whit_file.empty()) {
                const auto t = transform_from_json(nlohmann::json::parse(read_text(whit_file)));
                templates = t.templates;
                removed = t.removed;
                whit_tol = t.tolerance;
            } else if (!whit_templates.empty()) {
                templates = parse_templates(whit_templates);
            } else if (!whit_remove.empty()) {
                for (const auto& t : enumerate_aperiodic(whit_m))
                    if (std::find(removed.begin(), removed.end(), t) == removed.end()) templates.push_back(t);
            } else if (whit_m == 9) {
                templates = default_battery();
                const auto d = default_removed_templates();
                removed.assign(d.begin(), d.end());
            } else {
                templates = enumerate_aperiodic(whit_m);
            }
            const auto sigma = correlation_matrix(templates);
            if (whit_build->parsed()) {
                const auto t = build_transform(sigma, whit_tol, removed);
                write_text(whit_out, to_json(t).dump() + "\n");
                std::cerr << "transform " << transform_hash(t) << " over " << t.templates.size() << " templates\n";
            } else {
                const auto report = rank_analysis(sigma, whit_tol);
                const auto eig = eigendecompose(sigma);
                ordered_json j;
                j["templates"] = templates.size();
                j["template_hash"] = template_list_hash(templates);
                j["removed"] = nlohmann::json::array();
                for (const auto& t : removed) j["removed"].push_back(t.str());
                j["tolerance"] = whit_tol;
                j["rank"] = report.rank;
                j["largest_eigenvalue"] = eig.eigenvalues[0];
                j["smallest_eigenvalue"] = eig.eigenvalues[eig.eigenvalues.size() - 1];
                j["zero_eigenvalues"] = report.zero_eigenvalues;
                auto groups = ordered_json::array();
                for (const auto& g : report.removable) {
                    auto names = ordered_json::array();
                    for (const auto& t : g) names.push_back(t.str());
                    groups.push_back(names);
                }
                j["dependent_groups"] = groups;
                if (!whit_file.empty())
                    j["transform_hash"] = transform_hash(transform_from_json(nlohmann::json::parse(read_text(whit_file))));
                emit(j);
            }
        } else if (jd_eval->parsed()) {
            const auto r = joint_cdf_detail(jp, jd_x, jd_y);
            ordered_json j;
            j["N"] = jp.N;
            j["rho"] = jp.rho;
            j["X"] = jd_x;
            j["Y"] = jd_y;
            j["F"] = r.value;
            j["terms_used"] = r.terms;
            emit(j);
        } else if (jd_grid_cmd->parsed()) {
            const auto cells = cell_probability_grid(jp, jd_grid);
            std::ostringstream s;
            s.precision(17);
            s << "p1_lo,p1_hi,p2_lo,p2_hi,probability\n";
            for (unsigned i = 0; i < jd_grid; ++i)
                for (unsigned k = 0; k < jd_grid; ++k)
                    s << static_cast<double>(i) / jd_grid << ',' << static_cast<double>(i + 1) / jd_grid << ','
                      << static_cast<double>(k) / jd_grid << ',' << static_cast<double>(k + 1) / jd_grid << ','
                      << cells[i * jd_grid + k] << '\n';
            std::cout << s.str();
        } else if (fig1->parsed()) {
            const auto t1 = Template::parse(exp_first), t2 = Template::parse(exp_second);
            block_notes(cfg.bits, cfg.blocks, t1.length());
            const auto rep = run_joint_histogram(cfg, t1, t2);
            if (!exp_csv.empty()) write_text(exp_csv, joint_csv(rep));
            emit(to_json(rep));
        } else if (fig3->parsed()) {
            block_notes(cfg.bits, cfg.blocks, 9);
            const auto rep = run_rejection_experiment(cfg, default_transform());
            if (!exp_csv.empty()) write_text(exp_csv, rejection_csv(rep));
            emit(to_json(rep));
        }
    } catch (const error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.is_numeric() ? exit_numeric : exit_data;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: malformed-input: " << e.what() << '\n';
        return exit_data;
    }
    return exit_ok;
}
