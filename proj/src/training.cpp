#include "sata/training.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "sata/adam.hpp"
#include "sata/checkpoint.hpp"

namespace sata::training {

std::vector<std::vector<WindowRef>> plan_epoch(
    const std::vector<repr::MotionGraphSequence>& dataset, int window, int batch_size,
    Rng& rng) {
  if (dataset.empty()) throw Error("EmptyDataset", "no training sequences");
  if (batch_size < 1) throw Error("InvalidConfig", "batch_size must be >= 1");
  std::vector<int> order(dataset.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.uniform_int(i)]);

  std::vector<std::vector<WindowRef>> batches;
  std::vector<WindowRef> cur;
  for (int idx : order) {
    const auto& seq = dataset[idx];
    int max_start = std::max(0, seq.frame_count() - window);
    int start = max_start > 0 ? static_cast<int>(rng.uniform_int(max_start + 1)) : 0;
    cur.push_back({&seq, start});
    if (static_cast<int>(cur.size()) == batch_size) {
      batches.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) batches.push_back(std::move(cur));
  return batches;
}

namespace {

using model::BottleneckConfig;
using model::CtxT;
using model::SataModel;

// Value-space pre-latent rows of a batch, one row per (graph, frame).
std::vector<std::vector<float>> collect_pre_latents(SataModel& m,
                                                    const WindowBatchT<float>& batch) {
  ad::Tape tape;
  CtxT<float> cx(tape);
  cx.train = false;
  auto lat = m.encode(cx, batch.input);
  std::vector<std::vector<float>> rows;
  for (Var v : lat) {
    const auto& tv = tape.val(v);
    for (int i = 0; i < tv.shape[0]; ++i)
      rows.emplace_back(tv.data.begin() + static_cast<int64_t>(i) * tv.shape[1],
                        tv.data.begin() + static_cast<int64_t>(i + 1) * tv.shape[1]);
  }
  return rows;
}

void init_codebooks_from_batch(SataModel& m, const WindowBatchT<float>& batch, Rng& rng) {
  auto rows = collect_pre_latents(m, batch);
  if (rows.empty()) return;
  const int latent = m.cfg.bottleneck.latent;
  std::vector<std::vector<float>> residuals = rows;
  for (auto& cb : m.codebooks()) {
    for (int c = 0; c < cb.shape[0]; ++c) {
      const auto& src = residuals[rng.uniform_int(residuals.size())];
      for (int d = 0; d < latent; ++d) cb.at(c, d) = src[d];
    }
    // advance residuals through this stage so later stages see what they
    // will actually quantize
    for (auto& r : residuals) {
      float best = std::numeric_limits<float>::max();
      int bi = 0;
      for (int c = 0; c < cb.shape[0]; ++c) {
        float d2 = 0;
        for (int d = 0; d < latent; ++d) {
          float diff = r[d] - cb.at(c, d);
          d2 += diff * diff;
        }
        if (d2 < best) {
          best = d2;
          bi = c;
        }
      }
      for (int d = 0; d < latent; ++d) r[d] -= cb.at(bi, d);
    }
  }
}

}  // namespace

std::unique_ptr<model::SataModel> fit(const FitSettings& settings,
                                      const std::vector<repr::MotionGraphSequence>& dataset,
                                      FitReport* report) {
  settings.config.validate();
  settings.weights.validate();
  if (dataset.empty()) throw Error("EmptyDataset", "no training sequences");

  auto m = std::make_unique<SataModel>(settings.config);
  m->init(settings.seed);
  const bool rvq = settings.config.bottleneck.kind == BottleneckConfig::Kind::RVQ;

  std::vector<ad::AdamState> states;
  states.reserve(m->params.entries.size());
  for (auto& [name, p] : m->params.entries) states.push_back(ad::AdamState::for_param(*p));

  Rng plan_rng(hash_combine(settings.seed, 0x91a11edULL));

  std::ofstream log;
  if (!settings.log_path.empty()) {
    log.open(settings.log_path, std::ios::trunc);
    if (!log) throw Error("ConfigError", "cannot write '" + settings.log_path + "'");
  }

  // RVQ bookkeeping
  std::vector<std::vector<int>> unused_steps;  // [stage][code]
  if (rvq)
    unused_steps.assign(settings.config.bottleneck.quantizers,
                        std::vector<int>(settings.config.bottleneck.codebook, 0));
  bool codebooks_initialized = !rvq;
  Rng reset_rng(hash_combine(settings.seed, 0xc0de));

  int step = 0;
  int epoch = 0;
  LossBreakdown last_epoch_mean;
  double last_utilization = 0.0;
  bool stop = false;

  for (epoch = 0; epoch < settings.epochs && !stop; ++epoch) {
    double lr = ad::lr_schedule(epoch, settings.base_lr, settings.warmup_epochs,
                                settings.lr_gamma, settings.lr_min_factor);
    auto batches = plan_epoch(dataset, settings.config.window, settings.batch_size, plan_rng);

    LossBreakdown acc;
    int acc_n = 0;
    std::vector<std::vector<char>> used;
    if (rvq)
      used.assign(settings.config.bottleneck.quantizers,
                  std::vector<char>(settings.config.bottleneck.codebook, 0));

    for (const auto& refs : batches) {
      if (settings.max_steps > 0 && step >= settings.max_steps) {
        stop = true;
        break;
      }
      auto batch = make_window_batch<float>(refs, settings.config.window);
      if (!codebooks_initialized) {
        init_codebooks_from_batch(*m, batch, reset_rng);
        codebooks_initialized = true;
      }

      ad::Tape tape;
      CtxT<float> cx(tape);
      cx.train = true;
      cx.seed = hash_combine(settings.seed, static_cast<uint64_t>(step) + 1);

      auto lat = m->encode(cx, batch.input);
      std::vector<Var> dec_in;
      Var reg;
      bool have_reg = false;
      auto add_reg = [&](Var v) {
        reg = have_reg ? tape.add(reg, v) : v;
        have_reg = true;
      };
      std::vector<std::vector<float>> batch_latent_rows;
      for (Var pre : lat) {
        if (rvq) {
          auto q = m->bottleneck_rvq(cx, pre);
          dec_in.push_back(q.quantized);
          add_reg(tape.add(
              tape.scalar_mul(q.commit_loss, static_cast<float>(settings.weights.lambda_commit)),
              tape.scalar_mul(q.codebook_loss,
                              static_cast<float>(settings.weights.lambda_codebook))));
          for (const auto& row : q.indices)
            for (size_t k = 0; k < row.size(); ++k) used[k][row[k]] = 1;
          const auto& pv = tape.val(pre);
          for (int i = 0; i < pv.shape[0]; ++i)
            batch_latent_rows.emplace_back(
                pv.data.begin() + static_cast<int64_t>(i) * pv.shape[1],
                pv.data.begin() + static_cast<int64_t>(i + 1) * pv.shape[1]);
        } else {
          auto v = m->bottleneck_vae(cx, pre);
          dec_in.push_back(v.sample);
          add_reg(tape.scalar_mul(kl_loss<float>(cx, v.mu, v.logvar),
                                  static_cast<float>(settings.weights.lambda_kl)));
        }
      }
      Var decoded = m->decode(cx, dec_in, batch.input);
      auto loss = reconstruction_loss(cx, decoded, batch.gt, settings.weights);
      Var total = loss.total;
      if (have_reg) {
        reg = tape.scalar_mul(reg, 1.0f / static_cast<float>(lat.size()));
        loss.values.reg = tape.val(reg).data[0];
        total = tape.add(total, reg);
      }
      loss.values.total = tape.val(total).data[0];
      if (!std::isfinite(loss.values.total))
        throw Error("TrainingError", "NaN loss at step " + std::to_string(step));

      tape.backward(total);
      for (size_t i = 0; i < states.size(); ++i) {
        adam_step(*m->params.entries[i].second, states[i], static_cast<float>(lr));
      }
      m->params.zero_grads();

      // dead-code reset: a code unused for dead_code_steps consecutive steps
      // is reseeded from a random latent row of the current batch
      if (rvq && !batch_latent_rows.empty()) {
        for (size_t k = 0; k < unused_steps.size(); ++k)
          for (size_t c = 0; c < unused_steps[k].size(); ++c) {
            if (used[k][c]) {
              unused_steps[k][c] = 0;
            } else if (++unused_steps[k][c] >= settings.dead_code_steps) {
              const auto& src = batch_latent_rows[reset_rng.uniform_int(batch_latent_rows.size())];
              auto& cb = m->codebooks()[k];
              for (int d = 0; d < cb.shape[1]; ++d) cb.at(static_cast<int>(c), d) = src[d];
              unused_steps[k][c] = 0;
            }
          }
      }

      acc.rot += loss.values.rot;
      acc.pos += loss.values.pos;
      acc.vel += loss.values.vel;
      acc.contact += loss.values.contact;
      acc.penetration += loss.values.penetration;
      acc.smooth += loss.values.smooth;
      acc.bce += loss.values.bce;
      acc.root += loss.values.root;
      acc.reg += loss.values.reg;
      acc.total += loss.values.total;
      ++acc_n;
      ++step;
    }

    if (acc_n > 0) {
      const double inv = 1.0 / acc_n;
      last_epoch_mean = acc;
      for (double* f : {&last_epoch_mean.rot, &last_epoch_mean.pos, &last_epoch_mean.vel,
                        &last_epoch_mean.contact, &last_epoch_mean.penetration,
                        &last_epoch_mean.smooth, &last_epoch_mean.bce, &last_epoch_mean.root,
                        &last_epoch_mean.reg, &last_epoch_mean.total})
        *f *= inv;
      if (rvq) {
        int used_count = 0, total_codes = 0;
        for (const auto& stage : used) {
          for (char u : stage) used_count += u ? 1 : 0;
          total_codes += static_cast<int>(stage.size());
        }
        last_utilization = total_codes > 0 ? static_cast<double>(used_count) / total_codes : 0.0;
      }
      if (log) {
        nlohmann::json j;
        j["epoch"] = epoch;
        j["lr"] = lr;
        j["steps"] = step;
        j["loss"] = {{"rot", last_epoch_mean.rot},
                     {"pos", last_epoch_mean.pos},
                     {"vel", last_epoch_mean.vel},
                     {"contact", last_epoch_mean.contact},
                     {"penetration", last_epoch_mean.penetration},
                     {"smooth", last_epoch_mean.smooth},
                     {"bce", last_epoch_mean.bce},
                     {"root", last_epoch_mean.root},
                     {"reg", last_epoch_mean.reg},
                     {"total", last_epoch_mean.total}};
        if (rvq) j["codebook_utilization"] = last_utilization;
        log << j.dump() << "\n";
      }
    }

    if (settings.ckpt_every > 0 && !settings.ckpt_path.empty() &&
        (epoch + 1) % settings.ckpt_every == 0)
      ckpt::save_checkpoint(settings.ckpt_path, settings.config, m->params);
  }

  if (!settings.ckpt_path.empty())
    ckpt::save_checkpoint(settings.ckpt_path, settings.config, m->params);

  if (report != nullptr) {
    report->steps = step;
    report->epochs = epoch;
    report->final_loss = last_epoch_mean;
    report->codebook_utilization = last_utilization;
  }
  return m;
}

}  // namespace sata::training
