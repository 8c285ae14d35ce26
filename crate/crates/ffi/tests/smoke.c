#include <math.h>
#include <stdio.h>
#include "caplab.h"

int main(void) {
    CaplabConstellation *c = NULL;
    CaplabEstimate est;
    CaplabVerdict verdict;
    CaplabExpr *e = NULL;

    if (caplab_constellation_space_form(3, 3, 2.0, 1.0, 0.0, 0.0, 0.0, &c) != CAPLAB_STATUS_OK) {
        fprintf(stderr, "%s\n", caplab_last_error_message());
        return 1;
    }
    if (caplab_drifted_capacity(c, 1.0, 2.0, &est) != CAPLAB_STATUS_OK) return 2;
    if (fabs(est.value - 8.0 * M_PI) > 1e-7) return 3;
    if (caplab_classify(c, CAPLAB_MODE_INTRINSIC, &verdict) != CAPLAB_STATUS_OK) return 4;
    if (verdict != CAPLAB_VERDICT_P_HYPERBOLIC) return 5;
    caplab_constellation_free(c);

    if (caplab_expr_parse("sin(", &e) != CAPLAB_STATUS_SYNTAX) return 6;
    if (caplab_last_error_message() == NULL) return 7;

    printf("%.6f\n", est.value);
    return 0;
}
