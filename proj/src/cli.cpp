#include "bsp/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "bsp/checkpoint.hpp"
#include "bsp/extract.hpp"
#include "bsp/gradcheck.hpp"
#include "bsp/mesh_io.hpp"
#include "bsp/metrics.hpp"
#include "bsp/trainer.hpp"

namespace fs = std::filesystem;

namespace bsp {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

uint64_t fnv1a_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot hash missing file " + path);
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[65536];
    while (is.read(buf, sizeof buf) || is.gcount() > 0) {
        for (std::streamsize i = 0; i < is.gcount(); ++i) {
            h ^= uint64_t(uint8_t(buf[i]));
            h *= 0x100000001b3ull;
        }
    }
    return h;
}

std::string hex64(uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)v);
    return buf;
}

struct RunManifest {
    std::string verb;
    std::vector<std::pair<std::string, std::string>> config;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;

    void add(const std::string& k, const std::string& v) { config.emplace_back(k, v); }
    void add(const std::string& k, double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.9g", v);
        config.emplace_back(k, buf);
    }
    void add(const std::string& k, long long v) { config.emplace_back(k, std::to_string(v)); }

    void write(const std::string& dir) const {
        std::ofstream os(fs::path(dir) / "run_manifest.txt");
        os << "bspnet-run 1\n";
        os << "verb " << verb << "\n";
        for (const auto& [k, v] : config) os << "cfg " << k << " " << v << "\n";
        for (const auto& in : inputs) os << "input " << in << " fnv1a:" << hex64(fnv1a_file(in)) << "\n";
        for (const auto& out : outputs) os << "output " << out << "\n";
    }
};

std::vector<ResolutionStage> parse_resolutions(const std::string& spec) {
    std::vector<ResolutionStage> out;
    std::istringstream is(spec);
    std::string item;
    while (std::getline(is, item, ',')) {
        ResolutionStage st{};
        if (std::sscanf(item.c_str(), "%d:%d:%d", &st.resolution, &st.epochs, &st.batch_size) != 3)
            throw CLI::ValidationError("--resolutions", "expected res:epochs:batch, got '" + item + "'");
        out.push_back(st);
    }
    if (out.empty()) throw CLI::ValidationError("--resolutions", "no stages given");
    return out;
}

struct LoadedData {
    int dim = 2;
    std::vector<Shape2D> shapes2d;
    std::vector<Shape3D> shapes3d;
    size_t count() const { return dim == 2 ? shapes2d.size() : shapes3d.size(); }
};

LoadedData load_dataset(const std::string& manifest_path, int skip = 0, int count = -1) {
    Manifest m = load_manifest(manifest_path);
    fs::path base = fs::path(manifest_path).parent_path();
    LoadedData data;
    data.dim = m.dim;
    int end = count < 0 ? int(m.entries.size()) : std::min(int(m.entries.size()), skip + count);
    for (int i = skip; i < end; ++i) {
        const auto& e = m.entries[size_t(i)];
        if (m.dim == 2) {
            Shape2D s = load_image_bspv((base / e.voxel_path).string());
            s.id = e.id;
            if (!e.label_path.empty())
                s.labels = load_labels((base / e.label_path).string(), Shape2D::res);
            data.shapes2d.push_back(std::move(s));
        } else {
            Shape3D s = load_voxels((base / e.voxel_path).string());
            s.id = e.id;
            data.shapes3d.push_back(std::move(s));
        }
    }
    return data;
}

void write_bsptree(const ExtractedShape& ex, int dim, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << "bsptree 1\n";
    os << "dim " << dim << "\n";
    os << "planes " << ex.planes.dim(0) << " " << ex.planes.dim(1) << "\n";
    os << "selection " << ex.t_binary.dim(0) << " " << ex.t_binary.dim(1) << "\n";
    os << "blob " << (ex.planes.numel() + ex.t_binary.numel()) * 4 << "\n";
    for (double v : ex.planes.data) write_f32_le(os, float(v));
    for (double v : ex.t_binary.data) write_f32_le(os, float(v));
}

Tensor<double> code_for_shape(const BspModel<double>& model, const LoadedData& data, int index) {
    if (model.cfg.encoder == EncoderKind::latent) return encode(model, index);
    const Shape2D& s = data.shapes2d[size_t(index)];
    Tensor<double> img({Shape2D::res, Shape2D::res, 1});
    for (size_t i = 0; i < s.image.size(); ++i) img.data[i] = double(s.image[i]);
    return encode(model, img);
}

int count_used_vertices(const PolyMesh& mesh) {
    std::vector<char> used(mesh.vertices.size(), 0);
    for (const auto& f : mesh.faces)
        for (int id : f) used[size_t(id)] = 1;
    int n = 0;
    for (char u : used) n += u;
    return n;
}

// ---- gen-data ---------------------------------------------------------------

int cmd_gen_data(const std::string& kind, int count, uint64_t seed, const std::string& out_dir) {
    fs::create_directories(out_dir);
    Manifest manifest;
    char name[64];
    if (kind == "2d") {
        manifest.dim = 2;
        for (int i = 0; i < count; ++i) {
            Shape2D s = generate_shape_2d(i, seed);
            std::snprintf(name, sizeof name, "shape_%05d.bspv", i);
            save_image_bspv(s, (fs::path(out_dir) / name).string());
            ManifestEntry e{i, name, ""};
            std::snprintf(name, sizeof name, "shape_%05d.lbl", i);
            save_labels(s, (fs::path(out_dir) / name).string());
            e.label_path = name;
            manifest.entries.push_back(e);
        }
    } else {
        manifest.dim = 3;
        for (int i = 0; i < count; ++i) {
            Shape3D s = generate_shape_3d(i, seed);
            std::snprintf(name, sizeof name, "shape_%05d.bspv", i);
            save_voxels(s.grids.at(s.base_resolution()), s.base_resolution(),
                        (fs::path(out_dir) / name).string());
            manifest.entries.push_back({i, name, ""});
        }
    }
    save_manifest(manifest, (fs::path(out_dir) / "manifest.txt").string());

    RunManifest rm;
    rm.verb = "gen-data";
    rm.add("kind", kind);
    rm.add("count", (long long)count);
    rm.add("seed", (long long)seed);
    rm.outputs.push_back((fs::path(out_dir) / "manifest.txt").string());
    rm.write(out_dir);
    return kExitOk;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
    std::string data, out_dir;
    ModelConfig model;
    TrainConfig train;
    std::string resolutions = "64:100:16";
    std::string variant = "original";
    int train_count = 0; // 0: all
};

int cmd_train(TrainArgs& a) {
    a.train.stage1 = parse_resolutions(a.resolutions);
    a.model.variant = variant_from_name(a.variant);
    LoadedData data = load_dataset(a.data, 0, a.train_count > 0 ? a.train_count : -1);
    a.model.dim = data.dim;

    TrainSet set;
    if (data.dim == 2) {
        a.model.encoder = EncoderKind::conv2d;
        set = trainset_from_2d(data.shapes2d);
    } else {
        a.model.encoder = EncoderKind::latent;
        a.model.latent_count = int(data.shapes3d.size());
        std::vector<int> resolutions;
        for (const auto& st : a.train.stage1) resolutions.push_back(st.resolution);
        set = trainset_from_3d(data.shapes3d, resolutions, a.train.seed);
    }

    fs::create_directories(a.out_dir);
    a.train.live_log = (fs::path(a.out_dir) / "loss.csv").string();
    TrainResult result = train_two_stage(set, a.model, a.train);
    save_checkpoint(result.model, (fs::path(a.out_dir) / "checkpoint.bspn").string());
    if (result.stage1_model.params.count() > 0)
        save_checkpoint(result.stage1_model, (fs::path(a.out_dir) / "checkpoint_stage1.bspn").string());

    RunManifest rm;
    rm.verb = "train";
    rm.add("data", a.data);
    rm.add("variant", a.variant);
    rm.add("dim", (long long)a.model.dim);
    rm.add("planes", (long long)a.model.planes);
    rm.add("convexes", (long long)a.model.convexes);
    rm.add("lambda", a.train.lambda);
    rm.add("use_overlap", (long long)a.train.use_overlap);
    rm.add("use_soft_t", (long long)a.train.use_soft_t);
    rm.add("overlap_tolerance", a.train.overlap_tolerance);
    rm.add("resolutions", a.resolutions);
    rm.add("stage2_epochs", (long long)a.train.stage2_epochs);
    rm.add("step_size", a.train.step_size);
    rm.add("seed", (long long)a.train.seed);
    rm.add("threads", (long long)a.train.threads);
    rm.add("train_count", (long long)a.train_count);
    rm.inputs.push_back(a.data);
    rm.outputs.push_back((fs::path(a.out_dir) / "checkpoint.bspn").string());
    rm.outputs.push_back((fs::path(a.out_dir) / "loss.csv").string());
    rm.write(a.out_dir);

    if (result.diverged) {
        std::cerr << "training diverged; last finite checkpoint written\n";
        return kExitNumeric;
    }
    return kExitOk;
}

// ---- extract ----------------------------------------------------------------

int cmd_extract(const std::string& checkpoint, const std::string& data_path,
                const std::string& out_dir, int skip, int count, double lambda, bool prune,
                bool triangulated) {
    BspModel<double> model = load_checkpoint<double>(checkpoint);
    LoadedData data = load_dataset(data_path, skip, count);
    fs::create_directories(out_dir);
    ExtractOptions opts;
    opts.lambda = lambda;
    opts.prune = prune;

    char name[64];
    for (size_t i = 0; i < data.count(); ++i) {
        int index = model.cfg.encoder == EncoderKind::latent ? skip + int(i) : int(i);
        Tensor<double> code = model.cfg.encoder == EncoderKind::latent
                                  ? encode(model, index)
                                  : code_for_shape(model, data, int(i));
        ExtractedShape ex = extract_shape(model, code, opts);
        int id = data.dim == 2 ? data.shapes2d[i].id : data.shapes3d[i].id;
        if (data.dim == 2) {
            std::snprintf(name, sizeof name, "shape_%05d.svg", id);
            write_svg(ex.polygons, (fs::path(out_dir) / name).string());
            // S* and S+ rasters at the pixel grid for the stage comparison
            ShapeSample sample = sample_2d(data.shapes2d[i]);
            BspModel<float> mf = model.cast<float>();
            FieldEval<float> fields =
                eval_fields(mf, code.cast<float>(), sample.points.cast<float>(), lambda);
            std::vector<uint8_t> img(sample.occupancy.size(), 0);
            if (fields.sstar.numel() > 0)
                for (size_t k = 0; k < img.size(); ++k) img[k] = fields.sstar[k] <= 0.0f ? 255 : 0;
            std::snprintf(name, sizeof name, "shape_%05d_sstar.png", id);
            write_png_gray8(img, Shape2D::res, Shape2D::res, (fs::path(out_dir) / name).string());
            for (size_t k = 0; k < img.size(); ++k) img[k] = fields.splus[k] > 0.5f ? 255 : 0;
            std::snprintf(name, sizeof name, "shape_%05d_splus.png", id);
            write_png_gray8(img, Shape2D::res, Shape2D::res, (fs::path(out_dir) / name).string());
        } else {
            std::snprintf(name, sizeof name, "shape_%05d.obj", id);
            write_obj(ex.mesh, (fs::path(out_dir) / name).string(), triangulated);
        }
        std::snprintf(name, sizeof name, "shape_%05d.bsptree", id);
        write_bsptree(ex, data.dim, (fs::path(out_dir) / name).string());
        if (ex.skipped_planes > 0)
            std::cerr << "warning: shape " << id << ": skipped " << ex.skipped_planes
                      << " plane(s) with near-zero normals\n";
        if (triangulated) {
            int dropped = triangulate(ex.mesh).dropped_faces;
            if (dropped > 0)
                std::cerr << "warning: shape " << id << ": dropped " << dropped
                          << " degenerate face(s) during triangulation\n";
        }
    }

    RunManifest rm;
    rm.verb = "extract";
    rm.add("checkpoint", checkpoint);
    rm.add("data", data_path);
    rm.add("lambda", lambda);
    rm.add("prune", (long long)prune);
    rm.add("count", (long long)data.count());
    rm.inputs.push_back(checkpoint);
    rm.inputs.push_back(data_path);
    rm.write(out_dir);
    return kExitOk;
}

// ---- eval -------------------------------------------------------------------

struct EvalRow {
    int id;
    double cd, nc, ecd, iou;
    int v, f, polygons, convexes;
};

struct EvalSummary {
    std::vector<EvalRow> rows;
    double mean_cd = 0, mean_v = 0, mean_f = 0, mean_p = 0, mean_c = 0;
};

EvalSummary eval_dataset(const BspModel<double>& model, const LoadedData& data, double lambda,
                         bool prune, int cd_samples, int ecd_samples, double vote_fraction,
                         uint64_t seed, int latent_skip = 0) {
    EvalSummary summary;
    ExtractOptions opts;
    opts.lambda = lambda;
    opts.prune = prune;

    size_t n = data.count();
    std::vector<ExtractedShape> extracted(n);
    std::vector<Tensor<double>> codes(n);
    for (size_t i = 0; i < n; ++i) {
        codes[i] = model.cfg.encoder == EncoderKind::latent ? encode(model, latent_skip + int(i))
                                                            : code_for_shape(model, data, int(i));
        extracted[i] = extract_shape(model, codes[i], opts);
    }

    // segmentation by voting (2D labeled data only): assign each labeled pixel
    // to its nearest convex, vote over the first fifth of the shapes
    std::vector<int> convex_label;
    int num_labels = 3;
    bool labeled = data.dim == 2 && !data.shapes2d.empty() && !data.shapes2d[0].labels.empty();
    std::vector<std::vector<int>> assignments(n);
    if (labeled) {
        int c = model.cfg.convexes;
        std::vector<int> votes_convex, votes_label;
        size_t vote_shapes = std::max<size_t>(1, size_t(double(n) * vote_fraction));
        for (size_t i = 0; i < n; ++i) {
            const auto& polys = extracted[i].polygons;
            if (polys.empty()) continue;
            std::vector<int> cols;
            for (const auto& poly : polys) cols.push_back(poly.source_convex);
            ShapeSample sample = sample_2d(data.shapes2d[i]);
            Tensor<double> d = signed_distances(sample.points, extracted[i].planes);
            Tensor<double> cvals = convex_soft(d, select_columns(extracted[i].t_binary, cols));
            std::vector<int> assign = argmin_rows(cvals.cast<float>());
            auto& mapped = assignments[i];
            mapped.resize(assign.size());
            for (size_t k = 0; k < assign.size(); ++k) mapped[k] = cols[size_t(assign[k])];
            if (i < vote_shapes) {
                const auto& labels = data.shapes2d[i].labels;
                for (size_t k = 0; k < labels.size(); ++k) {
                    if (labels[k] == 255) continue;
                    votes_convex.push_back(mapped[k]);
                    votes_label.push_back(int(labels[k]));
                }
            }
        }
        convex_label = vote_labels(votes_convex, votes_label, c, num_labels);
    }

    for (size_t i = 0; i < n; ++i) {
        EvalRow row{};
        row.id = data.dim == 2 ? data.shapes2d[i].id : data.shapes3d[i].id;
        const ExtractedShape& ex = extracted[i];
        PolyMesh gt = data.dim == 2 ? raster_boundary_2d(data.shapes2d[i])
                                    : voxel_boundary_3d(data.shapes3d[i],
                                                        data.shapes3d[i].base_resolution());
        if (!ex.mesh.faces.empty()) {
            SurfaceSampling sa = sample_surface(ex.mesh, cd_samples, substream(seed, 2 * i));
            SurfaceSampling sb = sample_surface(gt, cd_samples, substream(seed, 2 * i + 1));
            row.cd = chamfer_distance(sa.points, sb.points);
            row.nc = normal_consistency(sa, sb);
            SurfaceSampling ea = ecd_samples == cd_samples
                                     ? sa
                                     : sample_surface(ex.mesh, ecd_samples, substream(seed, 2 * i));
            SurfaceSampling eb = ecd_samples == cd_samples
                                     ? sb
                                     : sample_surface(gt, ecd_samples, substream(seed, 2 * i + 1));
            double eps = data.dim == 2 ? 0.02 : 0.01;
            row.ecd = edge_chamfer_distance(ea, eb, eps);
        } else {
            row.cd = row.nc = row.ecd = std::numeric_limits<double>::quiet_NaN();
        }
        row.iou = std::numeric_limits<double>::quiet_NaN();
        if (labeled && !assignments[i].empty()) {
            const auto& labels = data.shapes2d[i].labels;
            std::vector<int> pred, gt_labels;
            for (size_t k = 0; k < labels.size(); ++k) {
                if (labels[k] == 255) continue;
                gt_labels.push_back(int(labels[k]));
                int cv = assignments[i][k];
                pred.push_back(cv >= 0 && !convex_label.empty() ? convex_label[size_t(cv)] : -1);
            }
            row.iou = per_label_iou(pred, gt_labels, num_labels);
        }
        row.v = count_used_vertices(ex.mesh);
        row.f = int(triangulate(ex.mesh).tris.size());
        row.polygons = int(ex.mesh.faces.size());
        row.convexes = ex.convex_count;
        summary.rows.push_back(row);
        if (std::isfinite(row.cd)) summary.mean_cd += row.cd;
        summary.mean_v += row.v;
        summary.mean_f += row.f;
        summary.mean_p += row.polygons;
        summary.mean_c += row.convexes;
    }
    double dn = double(std::max<size_t>(1, summary.rows.size()));
    summary.mean_cd /= dn;
    summary.mean_v /= dn;
    summary.mean_f /= dn;
    summary.mean_p /= dn;
    summary.mean_c /= dn;
    return summary;
}

void write_eval_csv(const EvalSummary& s, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << "id,cd,nc,ecd,iou,vertices,triangles,polygons,convexes\n";
    char buf[240];
    for (const auto& r : s.rows) {
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%d,%d,%d,%d\n", r.id, r.cd, r.nc,
                      r.ecd, r.iou, r.v, r.f, r.polygons, r.convexes);
        os << buf;
    }
}

int cmd_eval(const std::string& checkpoint, const std::string& data_path, const std::string& out,
             int skip, int count, double lambda, bool prune, int cd_samples, int ecd_samples,
             double vote_fraction, uint64_t seed) {
    BspModel<double> model = load_checkpoint<double>(checkpoint);
    LoadedData data = load_dataset(data_path, skip, count);
    EvalSummary summary = eval_dataset(model, data, lambda, prune, cd_samples, ecd_samples,
                                       vote_fraction, seed, skip);
    write_eval_csv(summary, out);

    std::ofstream rm(out + ".manifest.txt");
    rm << "bspnet-run 1\nverb eval\n";
    rm << "cfg checkpoint " << checkpoint << "\ncfg data " << data_path << "\n";
    rm << "cfg skip " << skip << "\ncfg count " << count << "\ncfg lambda " << lambda << "\n";
    rm << "cfg prune " << (prune ? 1 : 0) << "\ncfg cd_samples " << cd_samples << "\n";
    rm << "cfg ecd_samples " << ecd_samples << "\ncfg vote_fraction " << vote_fraction << "\n";
    rm << "cfg seed " << seed << "\n";
    rm << "input " << checkpoint << " fnv1a:" << hex64(fnv1a_file(checkpoint)) << "\n";
    rm << "input " << data_path << " fnv1a:" << hex64(fnv1a_file(data_path)) << "\n";
    rm << "output " << out << "\n";
    return kExitOk;
}

// ---- ablate -------------------------------------------------------------

int cmd_ablate(TrainArgs& base, const std::string& lambdas_csv, bool loss_ablations,
               int eval_count, int cd_samples) {
    std::vector<double> lambdas;
    std::istringstream is(lambdas_csv);
    std::string item;
    while (std::getline(is, item, ',')) lambdas.push_back(std::stod(item));
    if (lambdas.empty()) throw CLI::ValidationError("--lambdas", "empty sweep");

    struct Cell {
        double lambda;
        bool overlap, soft_t;
    };
    std::vector<Cell> cells;
    for (double l : lambdas) cells.push_back({l, false, false});
    if (loss_ablations) {
        double base_lambda = 0.01;
        cells.push_back({base_lambda, true, false});
        cells.push_back({base_lambda, false, true});
        cells.push_back({base_lambda, true, true});
    }

    base.train.stage1 = parse_resolutions(base.resolutions);
    base.model.variant = variant_from_name(base.variant);
    LoadedData data = load_dataset(base.data, 0, base.train_count > 0 ? base.train_count : -1);
    base.model.dim = data.dim;
    TrainSet set;
    if (data.dim == 2) {
        base.model.encoder = EncoderKind::conv2d;
        set = trainset_from_2d(data.shapes2d);
    } else {
        base.model.encoder = EncoderKind::latent;
        base.model.latent_count = int(data.shapes3d.size());
        std::vector<int> resolutions;
        for (const auto& st : base.train.stage1) resolutions.push_back(st.resolution);
        set = trainset_from_3d(data.shapes3d, resolutions, base.train.seed);
    }
    LoadedData eval_data = load_dataset(base.data, 0, std::min<int>(eval_count, int(data.count())));

    fs::create_directories(base.out_dir);
    std::ofstream os(fs::path(base.out_dir) / "ablation.csv");
    os << "lambda,use_overlap,use_soft_t,cd_before,cd_after,v_before,v_after,f_before,f_after,"
          "p_before,p_after,c_before,c_after\n";
    char buf[320];
    for (const auto& cell : cells) {
        TrainConfig tc = base.train;
        tc.lambda = cell.lambda;
        tc.use_overlap = cell.overlap;
        tc.use_soft_t = cell.soft_t;
        TrainResult result = train_two_stage(set, base.model, tc);
        if (result.diverged) return kExitNumeric;
        BspModel<double> model = result.model.cast<double>();
        EvalSummary before = eval_dataset(model, eval_data, cell.lambda, false, cd_samples,
                                          cd_samples, 0.2, tc.seed);
        EvalSummary after = eval_dataset(model, eval_data, cell.lambda, true, cd_samples,
                                         cd_samples, 0.2, tc.seed);
        std::snprintf(buf, sizeof buf,
                      "%.9g,%d,%d,%.9g,%.9g,%.1f,%.1f,%.1f,%.1f,%.1f,%.1f,%.2f,%.2f\n",
                      cell.lambda, cell.overlap ? 1 : 0, cell.soft_t ? 1 : 0, before.mean_cd,
                      after.mean_cd, before.mean_v, after.mean_v, before.mean_f, after.mean_f,
                      before.mean_p, after.mean_p, before.mean_c, after.mean_c);
        os << buf;
        os.flush();
    }

    RunManifest rm;
    rm.verb = "ablate";
    rm.add("data", base.data);
    rm.add("lambdas", lambdas_csv);
    rm.add("loss_ablations", (long long)loss_ablations);
    rm.add("seed", (long long)base.train.seed);
    rm.inputs.push_back(base.data);
    rm.outputs.push_back((fs::path(base.out_dir) / "ablation.csv").string());
    rm.write(base.out_dir);
    return kExitOk;
}

// ---- info ---------------------------------------------------------------

int cmd_info(const std::string& checkpoint) {
    BspModel<float> m = load_checkpoint<float>(checkpoint);
    std::cout << "variant " << variant_name(m.cfg.variant) << "\n";
    std::cout << "dim " << m.cfg.dim << "\n";
    std::cout << "planes " << m.cfg.planes << "\n";
    std::cout << "convexes " << m.cfg.convexes << "\n";
    std::cout << "stage " << m.cfg.stage << "\n";
    std::cout << "tmode " << (m.cfg.binary_t ? "binary" : "continuous") << "\n";
    std::cout << "encoder " << (m.cfg.encoder == EncoderKind::conv2d ? "conv2d" : "latent") << "\n";
    std::cout << "parameters " << m.params.total_scalars() << "\n";
    if (m.cfg.binary_t) {
        std::cout << "active_convexes " << active_columns(m.params[m.selection]).size() << "\n";
    }
    return kExitOk;
}

// Flat key=value config file expanded into flags; explicitly passed flags win.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    auto it = std::find(args.begin(), args.end(), "--config");
    if (it == args.end()) return args;
    if (it + 1 == args.end()) throw std::runtime_error("--config requires a file path");
    std::string path = *(it + 1);
    args.erase(it, it + 2);
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file " + path);
    std::string line;
    while (std::getline(is, line)) {
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r");
            size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) continue;
        std::string flag = "--" + key;
        if (std::find(args.begin(), args.end(), flag) != args.end()) continue;
        if (value == "true") {
            args.push_back(flag);
        } else if (value == "false") {
            // flag absent
        } else {
            args.push_back(flag);
            args.push_back(value);
        }
    }
    return args;
}

} // namespace

int run(const std::vector<std::string>& raw_args) {
    std::vector<std::string> args;
    try {
        args = expand_config(raw_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    CLI::App app{"BSP-Net style shape representation: train, extract, evaluate"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    std::string gen_kind = "2d", gen_out = "data";
    int gen_count = 100;
    uint64_t gen_seed = 7;
    gen->add_option("--kind", gen_kind)->check(CLI::IsMember({"2d", "3d"}));
    gen->add_option("--count", gen_count)->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_seed);
    gen->add_option("--out", gen_out)->required();

    // shared train-ish options
    TrainArgs ta;
    auto add_train_options = [&](CLI::App* cmd) {
        cmd->add_option("--data", ta.data)->required();
        cmd->add_option("--out", ta.out_dir)->required();
        cmd->add_option("--variant", ta.variant)
            ->check(CLI::IsMember({"original", "fc", "fc_deeper", "fc_qs", "fc_qs_deeper"}));
        cmd->add_option("--planes", ta.model.planes)->check(CLI::PositiveNumber);
        cmd->add_option("--convexes", ta.model.convexes)->check(CLI::PositiveNumber);
        cmd->add_option("--enc-channels", ta.model.enc_channels)->check(CLI::PositiveNumber);
        cmd->add_option("--lambda", ta.train.lambda);
        cmd->add_flag("--overlap", ta.train.use_overlap);
        cmd->add_flag("--soft-t", ta.train.use_soft_t);
        cmd->add_option("--overlap-tolerance", ta.train.overlap_tolerance);
        cmd->add_option("--resolutions", ta.resolutions);
        cmd->add_option("--stage2-epochs", ta.train.stage2_epochs);
        cmd->add_option("--step-size", ta.train.step_size);
        cmd->add_option("--seed", ta.train.seed);
        cmd->add_option("--threads", ta.train.threads)->check(CLI::PositiveNumber);
        cmd->add_option("--train-count", ta.train_count);
        cmd->add_flag("!--no-wall-time", ta.train.log_wall_time);
    };
    auto* train = app.add_subcommand("train", "two-stage training");
    add_train_options(train);

    // extract
    auto* extract = app.add_subcommand("extract", "mesh extraction from a checkpoint");
    std::string ex_checkpoint, ex_data, ex_out;
    int ex_skip = 0, ex_count = -1;
    double ex_lambda = 0.01;
    bool ex_no_prune = false, ex_triangulate = false;
    extract->add_option("--checkpoint", ex_checkpoint)->required();
    extract->add_option("--data", ex_data)->required();
    extract->add_option("--out", ex_out)->required();
    extract->add_option("--skip", ex_skip);
    extract->add_option("--count", ex_count);
    extract->add_option("--lambda", ex_lambda);
    extract->add_flag("--no-prune", ex_no_prune);
    extract->add_flag("--triangulate", ex_triangulate);

    // eval
    auto* eval = app.add_subcommand("eval", "metrics over a dataset");
    std::string ev_checkpoint, ev_data, ev_out = "eval.csv";
    int ev_skip = 0, ev_count = -1, ev_cd = 4096, ev_ecd = 4096;
    double ev_lambda = 0.01, ev_vote = 0.2;
    uint64_t ev_seed = 1;
    bool ev_no_prune = false;
    eval->add_option("--checkpoint", ev_checkpoint)->required();
    eval->add_option("--data", ev_data)->required();
    eval->add_option("--out", ev_out)->required();
    eval->add_option("--skip", ev_skip);
    eval->add_option("--count", ev_count);
    eval->add_option("--lambda", ev_lambda);
    eval->add_option("--cd-samples", ev_cd);
    eval->add_option("--ecd-samples", ev_ecd);
    eval->add_option("--vote-fraction", ev_vote);
    eval->add_option("--seed", ev_seed);
    eval->add_flag("--no-prune", ev_no_prune);

    // ablate
    auto* ablate = app.add_subcommand("ablate", "lambda / loss ablation grid");
    std::string ab_lambdas = "0.005,0.01,0.015,0.02,0.03,0.04,0.05";
    bool ab_loss = false;
    int ab_eval_count = 20, ab_cd = 2048;
    // reuse the train option set for per-cell training
    TrainArgs* ab_args = &ta;
    ablate->add_option("--data", ab_args->data)->required();
    ablate->add_option("--out", ab_args->out_dir)->required();
    ablate->add_option("--planes", ab_args->model.planes);
    ablate->add_option("--convexes", ab_args->model.convexes);
    ablate->add_option("--enc-channels", ab_args->model.enc_channels);
    ablate->add_option("--resolutions", ab_args->resolutions);
    ablate->add_option("--stage2-epochs", ab_args->train.stage2_epochs);
    ablate->add_option("--step-size", ab_args->train.step_size);
    ablate->add_option("--seed", ab_args->train.seed);
    ablate->add_option("--threads", ab_args->train.threads);
    ablate->add_option("--train-count", ab_args->train_count);
    ablate->add_option("--lambdas", ab_lambdas);
    ablate->add_flag("--loss-ablations", ab_loss);
    ablate->add_option("--eval-count", ab_eval_count);
    ablate->add_option("--cd-samples", ab_cd);

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient validation");
    int gc_trials = 100, gc_entries = 6, gc_threads = 2;
    double gc_eps = 1e-6;
    uint64_t gc_seed = 11;
    gradcheck->add_option("--trials", gc_trials)->check(CLI::PositiveNumber);
    gradcheck->add_option("--eps", gc_eps);
    gradcheck->add_option("--seed", gc_seed);
    gradcheck->add_option("--entries", gc_entries);
    gradcheck->add_option("--threads", gc_threads);

    // info
    auto* info = app.add_subcommand("info", "print checkpoint summary");
    std::string info_checkpoint;
    info->add_option("--checkpoint", info_checkpoint)->required();

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gen_kind, gen_count, gen_seed, gen_out);
        if (train->parsed()) return cmd_train(ta);
        if (extract->parsed())
            return cmd_extract(ex_checkpoint, ex_data, ex_out, ex_skip, ex_count, ex_lambda,
                               !ex_no_prune, ex_triangulate);
        if (eval->parsed())
            return cmd_eval(ev_checkpoint, ev_data, ev_out, ev_skip, ev_count, ev_lambda,
                            !ev_no_prune, ev_cd, ev_ecd, ev_vote, ev_seed);
        if (ablate->parsed()) return cmd_ablate(ta, ab_lambdas, ab_loss, ab_eval_count, ab_cd);
        if (gradcheck->parsed()) {
            GradcheckResult r = gradcheck_stage1(gc_trials, gc_eps, gc_seed, gc_entries, gc_threads);
            std::printf("configs %d rejected %d checked %ld max_rel_err %.3g\n", r.configs,
                        r.rejected, r.checked, r.max_rel_err);
            return r.max_rel_err < 1e-4 ? kExitOk : kExitNumeric;
        }
        if (info->parsed()) return cmd_info(info_checkpoint);
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

} // namespace bsp
