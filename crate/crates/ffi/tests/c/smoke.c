#include <stdio.h>
#include <string.h>
#include "classroom_abm.h"

#define CHECK(call)                                                      \
    do {                                                                 \
        CabmStatus s_ = (call);                                          \
        if (s_ != CABM_STATUS_OK) {                                      \
            char msg_[256];                                              \
            cabm_last_error_message(msg_, sizeof msg_);                  \
            fprintf(stderr, "%s failed (%d): %s\n", #call, s_, msg_);    \
            return 1;                                                    \
        }                                                                \
    } while (0)

int main(int argc, char **argv) {
    const char *out_dir = argc > 1 ? argv[1] : ".";

    CabmCalibrationInputs in;
    CabmCalibration cal;
    CHECK(cabm_calibration_inputs_default(&in));
    CHECK(cabm_calibrate(&in, &cal));
    printf("beta_max_per_day=%.15g\n", cal.beta_max_per_day);

    CabmSynthConfig sc;
    CHECK(cabm_synth_config_default(&sc));
    sc.session_length = 300;
    CabmObservation *obs = NULL;
    CHECK(cabm_observation_synth(&sc, &obs));

    CabmSweepOptions opt;
    CHECK(cabm_sweep_options_default(&opt));
    opt.reps_per_patient_zero = 1;
    opt.horizon_days = 3;
    CabmResults *res = NULL;
    CHECK(cabm_sweep(obs, NULL, &opt, &res));
    size_t n = 0;
    CHECK(cabm_results_len(res, &n));
    printf("runs=%zu\n", n);
    CHECK(cabm_results_write(res, out_dir));

    if (cabm_results_saturation(res, n, &cal.rho_daily) != CABM_STATUS_OUT_OF_RANGE) {
        return 2;
    }
    cabm_results_free(res);
    cabm_observation_free(obs);
    return 0;
}
