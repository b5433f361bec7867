#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "survtx.h"

#define CHECK(expr)                                                         \
    do {                                                                    \
        SvtStatus st_ = (expr);                                             \
        if (st_ != SVT_STATUS_OK) {                                         \
            char msg[256];                                                  \
            svt_last_error_message(msg, sizeof msg);                        \
            fprintf(stderr, "%s:%d: status %d: %s\n", __FILE__, __LINE__,   \
                    (int)st_, msg);                                         \
            return 1;                                                       \
        }                                                                   \
    } while (0)

int main(void) {
    enum { W = 32, H = 32, T = 9 };
    SvtSequence *hr = NULL;
    CHECK(svt_sequence_new(10, 1, &hr));
    uint8_t frame[W * H];
    for (int t = 0; t < T; t++) {
        for (int i = 0; i < W * H; i++) {
            frame[i] = (uint8_t)((i * 7 + (t < 4 ? 0 : 40)) % 251);
        }
        CHECK(svt_sequence_push_frame(hr, W, H, 1, frame, sizeof frame));
    }

    size_t red[T], nred = 0;
    CHECK(svt_detect_redundant(hr, 0.5, 15.0, 2, red, T, &nred));

    SvtEndConfig cfg = svt_end_config_default();
    cfg.selection.k = 4;
    SvtBuffer *bundle = NULL;
    CHECK(svt_end_pipeline(hr, &cfg, &bundle));
    const uint8_t *bytes = NULL;
    size_t len = 0;
    CHECK(svt_buffer_data(bundle, &bytes, &len));

    SvtSequence *out = NULL;
    CHECK(svt_cloud_reconstruct(bytes, len, NULL, &out));
    double psnr = 0.0;
    CHECK(svt_psnr(out, hr, 5, &psnr));

    uint8_t *copy = malloc(len);
    memcpy(copy, bytes, len);
    copy[len / 2] ^= 0x10;
    SvtSequence *bad = NULL;
    SvtStatus corrupt = svt_cloud_reconstruct(copy, len, NULL, &bad);
    free(copy);

    printf("version=%s frames=%zu redundant=%zu psnr5=%.1f corrupt=%d\n", svt_version(),
           svt_sequence_len(out), nred, psnr, (int)corrupt);

    svt_sequence_free(out);
    svt_buffer_free(bundle);
    svt_sequence_free(hr);
    return 0;
}
