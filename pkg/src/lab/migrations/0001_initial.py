# Generated by Django 6.0 on 2026-10-18 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('kind', models.CharField(choices=[('EntropyDecay', 'Entropy decay'), ('ChaosScaling', 'Chaos scaling'), ('ConfidenceCurve', 'Confidence curve'), ('CouplingGrowth', 'Coupling growth'), ('EquilibriumMarginal', 'Equilibrium marginal'), ('RateCertificate', 'Rate certificate'), ('NonlinearDecay', 'Nonlinear decay'), ('EquilibriumDensity', 'Equilibrium density')], db_index=True, max_length=40)),
                ('seed', models.CharField(max_length=20)),
                ('config', models.JSONField(default=dict)),
                ('series', models.JSONField(default=dict, help_text='Metric name to CSV path')),
                ('files', models.JSONField(blank=True, default=dict)),
                ('fits', models.JSONField(blank=True, default=dict)),
                ('output_dir', models.CharField(max_length=500)),
                ('manifest_path', models.CharField(blank=True, max_length=500)),
                ('wall_clock_seconds', models.FloatField(default=0.0)),
                ('version', models.CharField(max_length=40)),
                ('status', models.CharField(choices=[('completed', 'Completed'), ('failed', 'Failed')], default='completed', max_length=20)),
                ('error', models.TextField(blank=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
    ]
