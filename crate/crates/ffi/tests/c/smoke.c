#include <math.h>
#include <stdio.h>
#include <string.h>

#include "tcmerton.h"

int main(int argc, char **argv) {
    if (argc != 2) {
        fprintf(stderr, "usage: smoke CONFIG\n");
        return 2;
    }
    printf("version %s\n", tcm_version());

    TcmSolution *sol = NULL;
    TcmStatus s = tcm_solve_config_file(argv[1], &sol);
    if (s != TCM_STATUS_OK) {
        char msg[256];
        tcm_last_error_message(msg, sizeof msg);
        fprintf(stderr, "solve failed (%d): %s\n", (int)s, msg);
        return 1;
    }

    double pi = 0.0, c = 0.0, y = 0.0, x = 0.0;
    if (tcm_controls(sol, 0.0, 1.0, &pi, &c) != TCM_STATUS_OK) return 1;
    if (tcm_invert_pbar(sol, 0.5, 1.0, &y) != TCM_STATUS_OK) return 1;
    if (tcm_pbar(sol, 0.5, y, &x) != TCM_STATUS_OK) return 1;
    printf("pi %.6f c %.6f roundtrip %.3e\n", pi, c, fabs(x - 1.0));

    double v = 0.0;
    if (tcm_controls(sol, 0.0, 1e9, &pi, &c) != TCM_STATUS_OUT_OF_RANGE) return 1;
    if (tcm_value(NULL, 0.0, 1.0, &v) != TCM_STATUS_NULL_POINTER) return 1;
    if (tcm_last_error_message(NULL, 0) == 0) return 1;

    tcm_solution_free(sol);
    return fabs(pi - 3.0) < 1e-6 && fabs(x - 1.0) < 1e-10 ? 0 : 1;
}
