// Reference values for the test suites.
// GENERATED by tests/oracles/gen_reference.py -- do not edit by hand.
// Each value was computed at 60 significant digits with mpmath using
// quadrature / root-finding / numerical differentiation (no closed forms)
// and is frozen here to full double precision.
#pragma once

namespace oracle {
inline constexpr double f_cap1_lam1_y0 = 0.54132485461291811;
inline constexpr double fp_cap1_lam1_y0 = -0.58197670686932642;
inline constexpr double f_cap2_lam1_y0 = 1.8545865421311409;
inline constexpr double fp_cap2_lam1_y0 = -1.3130352854993313;
inline constexpr double f_cap06_lam1_y0 = -0.19587036834631956;
inline constexpr double fp_cap06_lam1_y0 = -0.32982152909652248;
inline constexpr double f_cap3_lam1_y0 = 2.9489308190572984;
inline constexpr double fp_cap3_lam1_y0 = -2.1571870894737679;
inline constexpr double f_cap13_lam05_y0 = 0.91483814530832085;
inline constexpr double fp_cap13_lam05_y0 = -0.90430257731261950;
inline constexpr double fpp_cap1_lam1_y0 = 0.079326405792207681;
inline constexpr double f_cap13_lam05_y03 = 0.65337992768427131;
inline constexpr double fp_cap13_lam05_y03 = -0.83707460668928651;
inline constexpr double f_cap2_lam1_y1m1em6 = 0.69314818056011198;
inline constexpr double f_cap2_lam1_y1p1em6 = 0.69314618056011198;
inline constexpr double fp_cap2_lam1_y1m1em6 = -1.0000003333333333;
inline constexpr double fp_cap2_lam1_y1p1em6 = -0.99999966666666667;
inline constexpr double f_cap2_lam1_y1m1em9 = 0.69314718155994531;
inline constexpr double f_cap2_lam1_y1p1em9 = 0.69314717955994531;
inline constexpr double fp_cap2_lam1_y1m1em9 = -1.0000000003333333;
inline constexpr double fp_cap2_lam1_y1p1em9 = -0.99999999966666667;
// limit -cap/2 at y=1
inline constexpr double fp_cap2_lam1_y1 = -1.0000000000000000;
inline constexpr double f_root_cap2_lam1 = 1.7968121300200200;
inline constexpr double H_cap1lam1_vx0 = 0.54132485461291811;
inline constexpr double Up_cap1lam1_vx0 = 0.0;
inline constexpr double H_cap1lam1_vx05 = 0.53114209226115588;
inline constexpr double Up_cap1lam1_vx05 = -0.041150955483618118;
inline constexpr double H_cap1lam1_vx1 = 0.50000000000000000;
inline constexpr double Up_cap1lam1_vx1 = -0.083333333333333333;
inline constexpr double H_cap1lam1_vx16 = 0.43543117782894452;
inline constexpr double Up_cap1lam1_vx16 = -0.13096719204133471;
inline constexpr double H_cap1lam1_vxm05 = 0.53177730790528083;
inline constexpr double Up_cap1lam1_vxm05 = 0.037366985182936267;
inline constexpr double H_cap3lam1_vx07 = 2.7875513039343969;
inline constexpr double Up_cap3lam1_vx07 = -0.50440205913011061;
inline constexpr double H_cap13lam05_vx02 = 0.91039152588355180;
inline constexpr double Up_cap13lam05_vx02 = -0.045961864727829025;
inline constexpr double u_a1l1_vx03_z077 = 0.82420648121318050;
inline constexpr double u_a1l1_vx16_z025 = 0.19946927345005975;
inline constexpr double u_a1l1_vxm2_z09 = 0.96671871202795028;
inline constexpr double u_a3l07_vxm02_z05 = 2.5990614692397626;
inline constexpr double u_a2l1_vx0999_z06 = 1.2004799359296241;
inline constexpr double mean_u_a1l1_vx0 = 0.58197670686932642;
inline constexpr double mean_u_a1l1_vx16 = 0.45029745150579587;
inline constexpr double bt_denominator = 0.42700000000000000;
inline constexpr double bt_g0 = 4.2469280162840180;
inline constexpr double bt_g1 = 4.5004759575547056;
inline constexpr double bt_g0_cap3 = 23.135639915320725;
inline constexpr double bt_g1_cap3 = 24.516872149071216;
inline constexpr double coefA_p03 = 0.24010000000000000;
inline constexpr double coefB_p03 = 1.9150000000000000;
inline constexpr double coefC_p03 = 0.24000000000000000;
inline constexpr double coefD_p03 = 0.71000000000000000;
// ∫ of the closed form with K̂=1 (divided by beta0)
inline constexpr double w_norm_integral_sig03 = 2.9439135117298521;
inline constexpr double w_at_p03_sig03 = 0.015480020349690173;
inline constexpr double phi_at_p03_sig03 = 0.045663803468852819;
// stationary mean of the belief
inline constexpr double Ew_p = 0.88923076923076923;
inline constexpr double Ew_p_quad = 0.88923076923076923;
inline constexpr double Varw_p = 0.0092512597902025572;
inline constexpr double w_at_p03_sig08 = 7.2563363067606338e-13;
inline constexpr double Ew_p_sig08 = 0.88923076923076923;
// largest positive root
inline constexpr double kroot_init_regime = 12.404105538156086;
// largest positive root
inline constexpr double kroot_cancel = 99999999.999999990;
inline constexpr double kroot_cancel_small = 1.0000000000000001e-8;
// largest positive root
inline constexpr double kroot_two_pos = 2.0000000000000000;
inline constexpr double kroot_two_pos_small = 1.0000000000000000;
// largest positive root
inline constexpr double kroot_linear = 2.0000000000000000;
inline constexpr double belief_step1_p = 0.71309477179901224;
inline constexpr double belief_step2_p = 0.70352191301769094;
inline constexpr double belief_step1_dW = 0.020238095238095238;
// sum_{k=0}^{K-1} exp(-d1*(k+1)*dt)*dt, dt=1/252
inline constexpr double annuity_d1_K2520 = 6.3199514637778121;
inline constexpr double disc_d1_T10 = 0.36787944117144232;
}  // namespace oracle
