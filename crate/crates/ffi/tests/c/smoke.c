#include <math.h>
#include <stdio.h>
#include "psitest.h"

#define CHECK(cond)                                              \
    do {                                                         \
        if (!(cond)) {                                           \
            fprintf(stderr, "check failed: %s (line %d)\n", #cond, __LINE__); \
            return 1;                                            \
        }                                                        \
    } while (0)

int main(void) {
    double x = 0.0;
    CHECK(psitest_delta0_closed_form(10, 0.2, &x) == PSITEST_STATUS_OK);
    CHECK(fabs(x - 0.0563297537083466) < 1e-12);
    CHECK(psitest_delta0_closed_form(1, 0.2, &x) == PSITEST_STATUS_DOMAIN);
    CHECK(psitest_last_error_message() != NULL);
    CHECK(psitest_delta0_closed_form(10, 0.2, NULL) == PSITEST_STATUS_NULL_POINTER);

    PsitestApparatus cfg = psitest_apparatus_nominal(3);
    cfg.dark_rate = 0.0;
    cfg.extinction_power_ratio = 0.0;
    PsitestCounts *counts = NULL;
    CHECK(psitest_run_experiment(&cfg, 20000, 7, &counts) == PSITEST_STATUS_OK);
    double eps = -1.0, err = -1.0;
    CHECK(psitest_counts_epsilon(counts, &eps, &err) == PSITEST_STATUS_OK);
    CHECK(eps == 0.0);
    uint64_t n = 1;
    CHECK(psitest_counts_get(counts, 1, 1, &n) == PSITEST_STATUS_OK);
    CHECK(n == 0);
    CHECK(psitest_counts_get(counts, 3, 0, &n) == PSITEST_STATUS_DOMAIN);
    psitest_counts_free(counts);

    PsitestDistribution *dist = NULL;
    CHECK(psitest_distribution_new(160e-6, 300e-9, 10, 0.2, 100, 1, &dist) == PSITEST_STATUS_OK);
    size_t len = 0;
    CHECK(psitest_distribution_len(dist, &len) == PSITEST_STATUS_OK);
    CHECK(len == 1000);
    double med = 0.0;
    CHECK(psitest_distribution_quantile(dist, 0.5, &med) == PSITEST_STATUS_OK);
    CHECK(med > 0.0563);
    psitest_distribution_free(dist);

    PsitestNoiseParams p = psitest_noise_params_nominal();
    PsitestBand band;
    CHECK(psitest_expected_epsilon(&p, 3, &band) == PSITEST_STATUS_OK);
    CHECK(fabs(band.central - 2.4e-4) < 1e-12);

    bool passed = false;
    CHECK(psitest_verify_nogo(100, 3, &passed) == PSITEST_STATUS_OK);
    CHECK(passed);
    printf("ok\n");
    return 0;
}
