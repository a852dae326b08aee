#include <stdio.h>
#include <string.h>
#include "proxcausal.h"

#define CHECK(expr)                                                         \
  do {                                                                      \
    PcStatus s_ = (expr);                                                   \
    if (s_ != PC_STATUS_OK) {                                               \
      const char *m_ = pc_last_error();                                     \
      fprintf(stderr, "%s -> %d: %s\n", #expr, (int)s_, m_ ? m_ : "");     \
      return 1;                                                             \
    }                                                                       \
  } while (0)

int main(void) {
  PcScm *scm = NULL;
  PcDataset *ds = NULL;
  PcGraph *g = NULL;
  PcCurve *curve = NULL;
  PcTestResult r;
  char *z = NULL, *w = NULL;
  double dose, est;

  if (pc_scenario_new("nope", &scm) != PC_STATUS_UNKNOWN_SCENARIO) return 2;

  CHECK(pc_scenario_new("synthetic-main", &scm));
  CHECK(pc_scm_sample(scm, 400, 11, &ds));
  if (pc_dataset_rows(ds) != 400 || pc_dataset_columns(ds) != 9) return 3;

  CHECK(pc_test_edge(ds, "A2", "Y2", "A1", 15, 8, 5, 0.05, &r));
  if (r.dof + r.design_rank != 60) return 4;

  CHECK(pc_graph_truth(scm, &g));
  CHECK(pc_select_proxies(g, "A3->Y1", &z, &w));
  if (strcmp(z, "Y3") != 0 || strcmp(w, "A5") != 0) return 5;

  CHECK(pc_estimate(ds, "A3->Y1", z, w, 5, -1.0, 1.0, true, &curve));
  if (pc_curve_len(curve) != 5) return 6;
  CHECK(pc_curve_point(curve, 2, &dose, &est));
  printf("version %s dose %.3f estimate %.4f p %.4f\n", pc_version(), dose, est, r.p_value);

  pc_string_free(z);
  pc_string_free(w);
  pc_curve_free(curve);
  pc_graph_free(g);
  pc_dataset_free(ds);
  pc_scm_free(scm);
  return 0;
}
